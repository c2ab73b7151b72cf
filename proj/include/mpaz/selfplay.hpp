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

#ifndef MPAZ_SELFPLAY_HPP_
#define MPAZ_SELFPLAY_HPP_

// Self-play game generation and the generate/train/checkpoint cycle.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mpaz/game.hpp"
#include "mpaz/mcts.hpp"
#include "mpaz/network.hpp"
#include "mpaz/training.hpp"
#include "mpaz/util.hpp"

namespace mpaz {

struct SelfPlayConfig {
  SearchConfig search;
  // Dirichlet noise on the search policy of the first move of each game.
  bool first_move_noise = true;
  // When >= 0, moves from this ply on are the argmax of pi instead of a sample.
  int argmax_from_move = -1;
};

struct GameRecord {
  std::string game;
  std::vector<GameState> states;
  std::vector<MoveDistribution> policies;
  std::vector<Move> moves;
  std::optional<ScoreVector> z;

  size_t length() const { return moves.size(); }
  bool complete() const {
    return z.has_value() && states.size() == policies.size() &&
           states.size() == moves.size();
  }
};

inline GameRecord play_training_game(const GamePtr& game, const Evaluator& evaluator,
                                     const SelfPlayConfig& config, Rng& rng) {
  GameRecord record;
  record.game = game->name;
  GameState state = initial_state(game);
  while (!state.is_terminal()) {
    MoveDistribution pi = run_search(state, evaluator, config.search, rng);
    if (config.first_move_noise && state.move_count() == 0) {
      pi = apply_root_noise(pi, config.search.dirichlet_alpha,
                            config.search.noise_epsilon, rng);
    }
    const bool greedy =
        config.argmax_from_move >= 0 && state.move_count() >= config.argmax_from_move;
    const Move move = greedy ? pi.argmax() : pi.sample(rng);
    record.states.push_back(state);
    record.policies.push_back(std::move(pi));
    record.moves.push_back(move);
    state = apply_move(state, move);
  }
  record.z = terminal_scores(state);
  return record;
}

inline std::vector<TrainingSample> to_samples(const GameRecord& record) {
  if (!record.complete()) throw std::invalid_argument("to_samples: incomplete game record");
  std::vector<TrainingSample> samples;
  samples.reserve(record.length());
  for (size_t i = 0; i < record.length(); ++i) {
    const GameState& s = record.states[i];
    samples.push_back({encode_state(s),
                       record.policies[i].dense(s.game().action_space_size), *record.z});
  }
  return samples;
}

inline nlohmann::json record_to_json(const GameRecord& record) {
  nlohmann::json moves = nlohmann::json::array();
  nlohmann::json pis = nlohmann::json::array();
  for (size_t i = 0; i < record.length(); ++i) {
    moves.push_back(record.moves[i].index);
    pis.push_back(record.policies[i].dense(record.states[i].game().action_space_size));
  }
  return {{"game", record.game},
          {"moves", std::move(moves)},
          {"pi", std::move(pis)},
          {"z", record.z ? nlohmann::json(*record.z) : nlohmann::json(nullptr)}};
}

struct IterationLog {
  int iteration = 0;
  int games = 0;  // cumulative
  size_t buffer_size = 0;
  LossTerms loss;  // mean over the iteration's steps
};

struct PolicyIterationOptions {
  GamePtr game;
  SelfPlayConfig selfplay;
  TrainConfig train;
  int iterations = 0;
  std::string out_dir;
  uint64_t seed = 0;
  int threads = 1;
  // Iterations already completed (non-zero when resuming).
  int start_iteration = 0;
  int games_played = 0;
  bool write_game_records = false;
  std::function<void(const IterationLog&)> on_iteration;
};

inline std::string checkpoint_path(const std::string& dir, int iteration) {
  return fmt::format("{}/checkpoint_{:04d}.json", dir, iteration);
}

inline std::string optimizer_path(const std::string& dir, int iteration) {
  return fmt::format("{}/optimizer_{:04d}.json", dir, iteration);
}

inline std::string format_log_row(const IterationLog& log) {
  return fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}", log.iteration, log.games,
                     log.buffer_size, log.loss.value_mse, log.loss.policy_ce,
                     log.loss.total);
}

inline constexpr const char* kTrainLogHeader =
    "iteration,games,buffer_size,value_mse,policy_ce,total";

// Per iteration: games_per_iteration self-play games into the buffer, then
// steps_per_iteration Adam steps, then a checkpoint. Writes into out_dir:
// checkpoint_NNNN.{json,bin}, optimizer_NNNN.{json,bin}, replay.jsonl,
// train_log.csv and (optionally) games.jsonl.
inline std::vector<IterationLog> policy_iteration(Parameters<float>& params,
                                                  AdamState<float>& adam,
                                                  ReplayBuffer& buffer,
                                                  const PolicyIterationOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const std::string log_path = opt.out_dir + "/train_log.csv";
  if (opt.start_iteration == 0) {
    save_checkpoint(params, checkpoint_path(opt.out_dir, 0), {{"iteration", 0}, {"games", 0}, {"game", opt.game->name}});
    save_optimizer(adam, params, optimizer_path(opt.out_dir, 0));
    std::ofstream(log_path) << kTrainLogHeader << "\n";
    std::ofstream(opt.out_dir + "/replay.jsonl", std::ios::trunc);
    if (opt.write_game_records) std::ofstream(opt.out_dir + "/games.jsonl", std::ios::trunc);
  }
  std::vector<IterationLog> history;
  int games_played = opt.games_played;
  for (int it = opt.start_iteration + 1; it <= opt.start_iteration + opt.iterations; ++it) {
    auto snapshot = std::make_shared<const Parameters<float>>(params);
    NetworkEvaluator<float> evaluator(snapshot);
    const int games = opt.train.games_per_iteration;
    std::vector<GameRecord> records(games);
    parallel_for(static_cast<size_t>(games), opt.threads, [&](size_t g) {
      Rng rng(derive_seed(opt.seed, {static_cast<uint64_t>(it), g, 1}));
      records[g] = play_training_game(opt.game, evaluator, opt.selfplay, rng);
    });
    {
      std::ofstream replay(opt.out_dir + "/replay.jsonl", std::ios::app);
      std::ofstream archive;
      if (opt.write_game_records) archive.open(opt.out_dir + "/games.jsonl", std::ios::app);
      for (const GameRecord& r : records) {
        std::vector<TrainingSample> samples = to_samples(r);
        for (const auto& s : samples) replay << sample_to_json(s).dump() << "\n";
        if (archive) archive << record_to_json(r).dump() << "\n";
        buffer.add_game(samples);
      }
    }
    games_played += games;

    IterationLog log;
    log.iteration = it;
    log.games = games_played;
    log.buffer_size = buffer.size();
    Rng train_rng(derive_seed(opt.seed, {static_cast<uint64_t>(it), 2}));
    const int steps = opt.train.steps_per_iteration;
    for (int s = 0; s < steps; ++s) {
      std::vector<TrainingSample> batch =
          buffer.sample_batch(static_cast<size_t>(opt.train.batch_size), train_rng);
      const LossTerms l = train_step(params, adam, batch, opt.train, opt.game);
      log.loss.value_mse += l.value_mse / steps;
      log.loss.policy_ce += l.policy_ce / steps;
      log.loss.l2_penalty += l.l2_penalty / steps;
      log.loss.total += l.total / steps;
    }
    save_checkpoint(params, checkpoint_path(opt.out_dir, it),
                    {{"iteration", it}, {"games", games_played}, {"game", opt.game->name}});
    save_optimizer(adam, params, optimizer_path(opt.out_dir, it));
    std::ofstream(log_path, std::ios::app) << format_log_row(log) << "\n";
    history.push_back(log);
    if (opt.on_iteration) opt.on_iteration(log);
  }
  return history;
}

}  // namespace mpaz

#endif  // MPAZ_SELFPLAY_HPP_
