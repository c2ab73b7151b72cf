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

// mpaz: train, evaluate and play multiplayer AlphaZero agents.
//
//   mpaz train    --game tictacmo --iterations 30 --out runs/ttm
//   mpaz gauntlet --checkpoint runs/ttm/checkpoint_0030.json --ladder 50,100,200
//   mpaz gauntlet --control --game tictacmo --ladder 50,100,200
//   mpaz plot     --summary summary.csv --control-summary control_summary.csv
//   mpaz play     --checkpoint runs/ttm/checkpoint_0030.json --seats 1
//   mpaz serve    --checkpoint runs/ttm/checkpoint_0030.json --port 8080

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "mpaz/commands.hpp"
#include "mpaz/server.hpp"

namespace {

std::string default_out_dir(const std::string& game) {
  if (const char* dir = std::getenv(mpaz::kCheckpointDirEnv)) return dir;
  return "runs/" + game;
}

mpaz::AgentKind parse_agent(const std::string& name) {
  if (name == "alphazero") return mpaz::AgentKind::kAlphaZero;
  if (name == "mcts") return mpaz::AgentKind::kMcts;
  if (name == "random") return mpaz::AgentKind::kRandom;
  throw CLI::ValidationError("--agent", "must be alphazero, mcts or random");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplayer AlphaZero: self-play training, MCTS gauntlets and human play"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run self-play policy iteration");
  std::string train_config, train_game, train_out;
  int iterations = 1, games = -1, steps = -1, channels = -1, blocks = -1, rollouts = -1,
      batch = -1, train_threads = 1;
  uint64_t train_seed = 0;
  std::string resume;
  bool records = false, quiet = false;
  train->add_option("--config", train_config, "JSON run configuration");
  train->add_option("--game", train_game, "tictacmo or connect3x3");
  train->add_option("--iterations", iterations, "Policy-iteration cycles")->check(CLI::NonNegativeNumber);
  train->add_option("--games", games, "Self-play games per iteration");
  train->add_option("--steps", steps, "Gradient steps per iteration");
  train->add_option("--channels", channels, "Network width");
  train->add_option("--blocks", blocks, "Number of SE-PRE residual blocks");
  train->add_option("--rollouts", rollouts, "MCTS rollouts per self-play move");
  train->add_option("--batch-size", batch, "Minibatch size");
  train->add_option("--out", train_out, "Output directory (default $MPAZ_CHECKPOINT_DIR or runs/<game>)");
  train->add_option("--resume", resume, "Continue from a checkpoint manifest in --out");
  train->add_option("--threads", train_threads, "Concurrent self-play games");
  train->add_option("--seed", train_seed, "Random seed");
  train->add_flag("--records", records, "Also archive every game to games.jsonl");
  train->add_flag("--quiet", quiet, "No per-iteration output");

  // gauntlet
  auto* gauntlet = app.add_subcommand("gauntlet", "Subject vs. MCTS opponents of increasing strength");
  mpaz::GauntletOptions gopt;
  std::string ladder_text = "50,100,200,400,800";
  std::string g_checkpoint;
  gauntlet->add_option("--checkpoint", g_checkpoint, "AlphaZero checkpoint manifest");
  gauntlet->add_option("--game", gopt.game, "Game (default: from checkpoint)");
  gauntlet->add_flag("--control", gopt.control, "Use an MCTS subject with the subject rollout budget");
  gauntlet->add_option("--rollouts", gopt.subject_rollouts, "Subject rollouts per move");
  gauntlet->add_option("--ladder", ladder_text, "Comma-separated opponent rollouts, increasing");
  gauntlet->add_option("--matches", gopt.matches_per_rung, "Seeded matches per ladder rung");
  gauntlet->add_option("--threads", gopt.threads, "Concurrent games per match");
  gauntlet->add_option("--out", gopt.out_dir, "Directory for CSV and SVG output");
  gauntlet->add_option("--seed", gopt.seed, "Random seed");

  // plot
  auto* plot = app.add_subcommand("plot", "Render gauntlet summary CSVs to SVG");
  mpaz::PlotOptions popt;
  std::string control_summary;
  plot->add_option("--summary", popt.summary, "Gauntlet summary.csv")->required();
  plot->add_option("--control-summary", control_summary, "Control summary CSV to overlay");
  plot->add_option("--label", popt.label, "Series label for the subject");
  plot->add_option("--out", popt.out_dir, "Output directory");
  uint64_t plot_seed = 0;
  plot->add_option("--seed", plot_seed, "Unused; accepted for uniformity");

  // play
  auto* play = app.add_subcommand("play", "Play in the terminal against agents");
  mpaz::PlayOptions play_opt;
  std::string play_checkpoint, play_agent = "alphazero";
  play->add_option("--checkpoint", play_checkpoint, "AlphaZero checkpoint manifest");
  play->add_option("--game", play_opt.game, "Game (default: from checkpoint)");
  play->add_option("--seats", play_opt.human_seats, "Human seat(s), 0-based");
  play->add_option("--agent", play_agent, "alphazero, mcts or random");
  play->add_option("--rollouts", play_opt.rollouts, "Agent rollouts per move");
  play->add_option("--seed", play_opt.seed, "Random seed");

  // serve
  auto* serve = app.add_subcommand("serve", "Host human-vs-agent games over HTTP");
  std::string serve_checkpoint, host = "0.0.0.0", static_dir;
  int port = 8080, serve_rollouts = mpaz::kHumanFacingRollouts;
  uint64_t serve_seed = 0;
  serve->add_option("--checkpoint", serve_checkpoint, "AlphaZero checkpoint manifest");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--static", static_dir, "Directory of web UI assets served at /");
  serve->add_option("--rollouts", serve_rollouts, "Default agent rollouts per move");
  serve->add_option("--seed", serve_seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      mpaz::TrainOptions opt;
      if (!train_config.empty()) opt.run = mpaz::load_run_config(train_config);
      if (!train_game.empty()) opt.run.game = train_game;
      if (opt.run.game.empty()) {
        std::cerr << "error: train needs a game (--game tictacmo|connect3x3 or \"game\" in --config)\n"
                  << train->help();
        return 2;
      }
      mpaz::game_by_name(opt.run.game);
      if (games >= 0) opt.run.train.games_per_iteration = games;
      if (steps >= 0) opt.run.train.steps_per_iteration = steps;
      if (channels > 0) opt.run.channels = channels;
      if (blocks >= 0) opt.run.num_blocks = blocks;
      if (rollouts > 0) opt.run.selfplay.search.rollouts_per_turn = rollouts;
      if (batch > 0) opt.run.train.batch_size = batch;
      opt.iterations = iterations;
      opt.out_dir = train_out.empty() ? default_out_dir(opt.run.game) : train_out;
      if (!resume.empty()) opt.resume = resume;
      opt.seed = train_seed;
      opt.threads = train_threads;
      opt.write_game_records = records;
      opt.quiet = quiet;
      return mpaz::cmd_train(opt);
    }
    if (*gauntlet) {
      gopt.ladder = mpaz::parse_ladder(ladder_text);
      if (!g_checkpoint.empty()) gopt.checkpoint = g_checkpoint;
      return mpaz::cmd_gauntlet(gopt);
    }
    if (*plot) {
      if (!control_summary.empty()) popt.control_summary = control_summary;
      return mpaz::cmd_plot(popt);
    }
    if (*play) {
      play_opt.agent = parse_agent(play_agent);
      if (!play_checkpoint.empty()) play_opt.checkpoint = play_checkpoint;
      return mpaz::cmd_play(play_opt, std::cin, std::cout);
    }
    if (*serve) {
      std::shared_ptr<const mpaz::Parameters<float>> params;
      if (!serve_checkpoint.empty()) {
        params = std::make_shared<const mpaz::Parameters<float>>(
            mpaz::load_checkpoint<float>(mpaz::resolve_checkpoint(serve_checkpoint)));
      }
      mpaz::SessionManager manager(params, serve_seed, serve_rollouts);
      httplib::Server server;
      mpaz::install_routes(server, manager);
      if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
        std::cerr << "error: cannot serve static directory " << static_dir << "\n";
        return 1;
      }
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
