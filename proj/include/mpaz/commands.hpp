// Copyright 2026 The mpaz Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MPAZ_COMMANDS_HPP_
#define MPAZ_COMMANDS_HPP_

// Subcommand bodies behind the mpaz CLI. Argument parsing lives in
// tools/mpaz.cpp; these take already-validated option structs so tests can
// drive them directly.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mpaz/arena.hpp"
#include "mpaz/config.hpp"
#include "mpaz/game.hpp"
#include "mpaz/network.hpp"
#include "mpaz/plot.hpp"
#include "mpaz/selfplay.hpp"
#include "mpaz/training.hpp"

namespace mpaz {

inline constexpr const char* kCheckpointDirEnv = "MPAZ_CHECKPOINT_DIR";

// Resolves a checkpoint manifest path: as given, else relative to
// $MPAZ_CHECKPOINT_DIR. Throws if neither exists.
inline std::string resolve_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv(kCheckpointDirEnv)) {
    const fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt.string();
  }
  throw std::runtime_error("checkpoint not found: " + path);
}

inline std::string game_of_checkpoint(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  const nlohmann::json j = nlohmann::json::parse(in);
  return j.value("extra", nlohmann::json::object()).value("game", std::string());
}

struct TrainOptions {
  RunConfig run;
  int iterations = 1;
  std::string out_dir;
  std::optional<std::string> resume;
  uint64_t seed = 0;
  int threads = 1;
  bool write_game_records = false;
  bool quiet = false;
};

inline int cmd_train(const TrainOptions& opt, std::ostream& out = std::cout) {
  namespace fs = std::filesystem;
  const GamePtr game = game_by_name(opt.run.game);
  Parameters<float> params;
  AdamState<float> adam;
  ReplayBuffer buffer(opt.run.train.buffer_capacity);
  PolicyIterationOptions pi;
  pi.game = game;
  pi.selfplay = opt.run.selfplay;
  pi.train = opt.run.train;
  pi.iterations = opt.iterations;
  pi.out_dir = opt.out_dir;
  pi.seed = opt.seed;
  pi.threads = opt.threads;
  pi.write_game_records = opt.write_game_records;
  if (opt.resume) {
    const std::string path = resolve_checkpoint(*opt.resume);
    nlohmann::json extra;
    params = load_checkpoint<float>(path, &extra);
    const int iteration = extra.value("iteration", 0);
    pi.start_iteration = iteration;
    pi.games_played = extra.value("games", 0);
    const std::string dir = fs::path(path).parent_path().string();
    const std::string opt_path = optimizer_path(dir.empty() ? "." : dir, iteration);
    adam = fs::exists(opt_path) ? load_optimizer<float>(opt_path, params)
                                : AdamState<float>(params);
    if (fs::absolute(dir.empty() ? "." : dir) != fs::absolute(opt.out_dir)) {
      throw std::runtime_error("--resume must point into the --out directory");
    }
    const std::string replay = pi.out_dir + "/replay.jsonl";
    if (fs::exists(replay)) load_replay(buffer, replay, *game);
  } else {
    Rng init_rng(derive_seed(opt.seed, {0}));
    params = init_parameters<float>(opt.run.network_config(), init_rng);
    adam = AdamState<float>(params);
  }
  pi.on_iteration = [&](const IterationLog& log) {
    if (!opt.quiet) {
      out << fmt::format("iteration {:4d}  games {:6d}  buffer {:7d}  value_mse {:.4f}  "
                         "policy_ce {:.4f}  total {:.4f}\n",
                         log.iteration, log.games, log.buffer_size, log.loss.value_mse,
                         log.loss.policy_ce, log.loss.total);
    }
  };
  policy_iteration(params, adam, buffer, pi);
  if (!opt.quiet) {
    out << "wrote " << checkpoint_path(opt.out_dir, pi.start_iteration + pi.iterations) << "\n";
  }
  return 0;
}

struct GauntletOptions {
  std::string game;
  std::optional<std::string> checkpoint;
  bool control = false;
  int subject_rollouts = 50;
  std::vector<int> ladder{50, 100, 200, 400, 800};
  int matches_per_rung = 1;
  uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
};

inline std::vector<int> parse_ladder(const std::string& text) {
  std::vector<int> ladder;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad ladder entry: " + item);
    ladder.push_back(v);
  }
  validate_ladder(ladder);
  return ladder;
}

inline int cmd_gauntlet(const GauntletOptions& opt, std::ostream& out = std::cout) {
  namespace fs = std::filesystem;
  GauntletConfig cfg;
  cfg.opponent_rollout_ladder = opt.ladder;
  cfg.matches_per_rung = opt.matches_per_rung;
  cfg.seed = opt.seed;
  cfg.threads = opt.threads;
  std::string game_name = opt.game;
  if (opt.control) {
    cfg.subject = AgentSpec::mcts(fmt::format("control_mcts{}", opt.subject_rollouts),
                                  opt.subject_rollouts);
  } else {
    if (!opt.checkpoint) throw std::runtime_error("gauntlet needs --checkpoint (or --control)");
    const std::string path = resolve_checkpoint(*opt.checkpoint);
    auto params = std::make_shared<const Parameters<float>>(load_checkpoint<float>(path));
    if (game_name.empty()) game_name = game_of_checkpoint(path);
    cfg.subject = AgentSpec::alphazero(fmt::format("alphazero{}", opt.subject_rollouts),
                                       params, opt.subject_rollouts);
  }
  if (game_name.empty()) throw std::runtime_error("gauntlet needs --game");
  const GamePtr game = game_by_name(game_name);
  if (cfg.subject.params && (cfg.subject.params->config().policy_size != game->action_space_size ||
                             cfg.subject.params->config().value_size != game->num_players)) {
    throw std::runtime_error("checkpoint does not match game " + game_name);
  }
  const GauntletResult result = run_gauntlet(cfg, game);
  fs::create_directories(opt.out_dir);
  const std::string prefix = opt.control ? "control_" : "";
  std::ofstream(opt.out_dir + "/" + prefix + "results.csv") << results_csv(result);
  std::ofstream(opt.out_dir + "/" + prefix + "summary.csv") << summary_csv(result);
  std::ofstream(opt.out_dir + "/" + prefix + "scores.svg")
      << plot_scores(result.rows, result.subject_label);
  std::ofstream(opt.out_dir + "/" + prefix + "difference.svg")
      << plot_difference(result.rows, result.subject_label);
  out << summary_csv(result);
  return 0;
}

struct PlotOptions {
  std::string summary;
  std::optional<std::string> control_summary;
  std::string label = "alphazero";
  std::string out_dir = ".";
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int cmd_plot(const PlotOptions& opt) {
  std::filesystem::create_directories(opt.out_dir);
  const auto rows = parse_summary_csv(read_file(opt.summary));
  std::ofstream(opt.out_dir + "/scores.svg") << plot_scores(rows, opt.label);
  if (opt.control_summary) {
    const auto control = parse_summary_csv(read_file(*opt.control_summary));
    std::ofstream(opt.out_dir + "/difference.svg")
        << plot_difference(rows, opt.label, &control, "control mcts");
  } else {
    std::ofstream(opt.out_dir + "/difference.svg") << plot_difference(rows, opt.label);
  }
  return 0;
}

struct PlayOptions {
  std::string game;
  std::optional<std::string> checkpoint;
  std::vector<int> human_seats{0};
  AgentKind agent = AgentKind::kAlphaZero;
  int rollouts = 500;
  uint64_t seed = 0;
};

inline std::string format_scores(const ScoreVector& z) {
  std::vector<std::string> parts;
  for (double v : z) parts.push_back(fmt::format("{}", v));
  return "[" + fmt::format("{}", fmt::join(parts, ",")) + "]";
}

// Terminal game: humans type move indices; agents fill the other seats.
// Returns 0 on a finished game and on EOF (after printing "aborted").
inline int cmd_play(const PlayOptions& opt, std::istream& in, std::ostream& out) {
  std::string game_name = opt.game;
  std::shared_ptr<const Parameters<float>> params;
  if (opt.agent == AgentKind::kAlphaZero) {
    if (!opt.checkpoint) throw std::runtime_error("play needs --checkpoint for alphazero agents");
    const std::string path = resolve_checkpoint(*opt.checkpoint);
    params = std::make_shared<const Parameters<float>>(load_checkpoint<float>(path));
    if (game_name.empty()) game_name = game_of_checkpoint(path);
  }
  if (game_name.empty()) throw std::runtime_error("play needs --game");
  const GamePtr game = game_by_name(game_name);
  std::vector<bool> human(game->num_players, false);
  for (int s : opt.human_seats) {
    if (s < 0 || s >= game->num_players) {
      throw std::invalid_argument("seat out of range: " + std::to_string(s));
    }
    human[s] = true;
  }
  AgentSpec spec;
  spec.kind = opt.agent;
  spec.label = "agent";
  spec.rollouts = opt.rollouts;
  spec.params = params;
  std::unique_ptr<Agent> agent = make_agent(spec);
  std::vector<Rng> rngs;
  for (int s = 0; s < game->num_players; ++s) rngs.emplace_back(derive_seed(opt.seed, {static_cast<uint64_t>(s)}));

  GameState state = initial_state(game);
  const char* hint = game->gravity ? "column" : "cell (row*cols+col)";
  while (!state.is_terminal()) {
    out << "\n" << render(state);
    const int seat = state.to_move();
    if (!human[seat]) {
      const Move m = agent->select_move(state, rngs[seat]);
      out << fmt::format("seat {} ({}) plays {}\n", seat, player_glyph(seat), m.index);
      state = apply_move(state, m);
      continue;
    }
    std::vector<std::string> legal;
    for (Move m : legal_moves(state)) legal.push_back(std::to_string(m.index));
    out << fmt::format("seat {} ({}) to move, enter a {} from [{}]: ", seat, player_glyph(seat),
                       hint, fmt::join(legal, " "));
    out.flush();
    std::string line;
    if (!std::getline(in, line)) {
      out << "\naborted\n";
      return 0;
    }
    int index = -1;
    try {
      size_t used = 0;
      index = std::stoi(line, &used);
      while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) ++used;
      if (used != line.size()) index = -1;
    } catch (const std::exception&) {
      index = -1;
    }
    if (!is_legal(state, Move{index})) {
      out << "invalid move '" << line << "', try again\n";
      continue;
    }
    state = apply_move(state, Move{index});
  }
  out << "\n" << render(state);
  out << "final scores: " << format_scores(*terminal_scores(state)) << "\n";
  return 0;
}

}  // namespace mpaz

#endif  // MPAZ_COMMANDS_HPP_
