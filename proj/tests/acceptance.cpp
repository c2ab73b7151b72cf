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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// fails. Criteria 7 and 8 share one desk-scale training run (a few minutes
// on one core).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "mpaz/commands.hpp"
#include "oracle.hpp"

namespace mpaz {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "mpaz_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome uct_tictactoe() {
  const auto start = Clock::now();
  oracle::MaxnSolver solver;
  const GameState root_state = initial_state(tic_tac_toe());
  const std::vector<double> values = solver.move_values(root_state);
  const std::vector<Move> moves = legal_moves(root_state);
  SearchConfig config;
  config.rollouts_per_turn = 10000;
  int non_losing = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto root = build_uct_tree(root_state, config, rng);
    const Move best = visit_distribution(*root, 0.0).argmax();
    const auto it = std::find(moves.begin(), moves.end(), best);
    if (it != moves.end() && values[it - moves.begin()] >= 0.0) ++non_losing;
  }
  const double secs = seconds_since(start);
  return {non_losing >= 95 && secs < 300.0,
          fmt::format("{}/100 non-losing first moves in {:.1f} s", non_losing, secs)};
}

EdgeStats zero_edge() { return EdgeStats{}; }

Outcome backup_trace() {
  // A (p0) -e0-> B (p1) -e0-> C (p2) -e0/e1-> leaves; A -e1-> D (p1).
  SearchNode A(initial_state(tic_tac_mo()));
  A.moves = {Move{0}, Move{1}};
  A.edges = {zero_edge(), zero_edge()};
  A.children.resize(2);
  A.expanded = true;
  SearchNode B(oracle::play(tic_tac_mo(), {14}));
  SearchNode C(oracle::play(tic_tac_mo(), {14, 13}));
  SearchNode D(oracle::play(tic_tac_mo(), {12}));
  B.moves = {Move{0}};
  B.edges = {zero_edge()};
  C.moves = {Move{0}, Move{1}};
  C.edges = {zero_edge(), zero_edge()};
  D.moves = {Move{0}};
  D.edges = {zero_edge()};
  backpropagate(std::vector<PathStep>{{&A, 0}, {&B, 0}, {&C, 0}}, {0.2, -0.1, 0.3});
  backpropagate(std::vector<PathStep>{{&A, 0}, {&B, 0}, {&C, 1}}, {-1.0, 1.0, -1.0});
  backpropagate(std::vector<PathStep>{{&A, 1}, {&D, 0}}, {0.5, 0.25, -0.75});
  // Hand-computed: each edge accumulates the mover's component.
  const std::vector<std::tuple<const EdgeStats*, int, double>> expected = {
      {&A.edges[0], 2, 0.2 - 1.0}, {&A.edges[1], 1, 0.5},  {&B.edges[0], 2, -0.1 + 1.0},
      {&C.edges[0], 1, 0.3},       {&C.edges[1], 1, -1.0}, {&D.edges[0], 1, 0.25}};
  int matched = 0;
  for (const auto& [e, n, w] : expected) {
    if (e->visits == n && e->total_value == w && e->mean_value == w / n) ++matched;
  }
  return {matched == static_cast<int>(expected.size()),
          fmt::format("{}/{} edges match exactly", matched, expected.size())};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  const GamePtr g = tic_tac_mo();
  NetworkConfig cfg = NetworkConfig::for_game(*g, 4, 1);
  Rng rng(11);
  Parameters<double> params = init_parameters<double>(cfg, rng);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (auto& a : params.arrays()) {
    if (a.kind == ParamKind::kBias || a.kind == ParamKind::kNormShift) {
      for (double& x : a.data) x = noise(rng);
    }
    if (a.kind == ParamKind::kNormScale) {
      for (double& x : a.data) x = 1.0 + noise(rng);
    }
  }
  std::vector<StateTensor> xs;
  std::vector<LossTarget> ys;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (xs.size() < 3) {
    GameState s = initial_state(g);
    const int plies = static_cast<int>(rng() % 8);
    for (int k = 0; k < plies && !s.is_terminal(); ++k) {
      const auto moves = legal_moves(s);
      s = apply_move(s, moves[rng() % moves.size()]);
    }
    if (s.is_terminal()) continue;
    LossTarget t;
    t.mask = legal_mask(s);
    t.pi.assign(g->action_space_size, 0.0);
    double sum = 0.0;
    for (int a = 0; a < g->action_space_size; ++a) {
      if (t.mask[a]) sum += t.pi[a] = u(rng);
    }
    for (double& p : t.pi) p /= sum;
    for (int i = 0; i < g->num_players; ++i) t.z.push_back(2.0 * u(rng) - 1.0);
    xs.push_back(encode_state(s));
    ys.push_back(std::move(t));
  }
  const double l2 = 1e-3;
  const std::span<const StateTensor> xspan(xs);
  const std::span<const LossTarget> yspan(ys);
  const auto analytic = compute_gradients(params, xspan, yspan, l2);
  const double h = 1e-4;
  size_t total = 0, ok = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    if (!is_trainable(params[i].kind)) continue;
    for (size_t j = 0; j < params[i].data.size(); ++j) {
      double& w = params[i].data[j];
      const double w0 = w;
      w = w0 + h;
      const double up = compute_gradients(params, xspan, yspan, l2).loss.total;
      w = w0 - h;
      const double down = compute_gradients(params, xspan, yspan, l2).loss.total;
      w = w0;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.grads[i][j];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
      ++total;
      ok += rel <= 1e-3;
    }
  }
  const double secs = seconds_since(start);
  const double frac = static_cast<double>(ok) / static_cast<double>(total);
  return {frac >= 0.999 && secs < 60.0,
          fmt::format("{}/{} parameters within 1e-3 in {:.1f} s", ok, total, secs)};
}

Outcome loss_identity() {
  Rng rng(4);
  const auto params =
      init_parameters<float>(NetworkConfig::for_game(*tic_tac_mo(), 4, 1), rng);
  const NetworkOutput perfect{std::vector<double>(15, 0.0), {0.25, -0.5, 0.75}};
  const LossTerms a =
      loss(perfect, MoveDistribution({{Move{6}, 1.0}}), {0.25, -0.5, 0.75}, params, 1e-4);
  const bool exact = a.total == l2_penalty(params, 1e-4) && a.l2_penalty > 0.0;

  const Parameters<float> zeros(NetworkConfig::for_game(*tic_tac_mo(), 4, 1));
  const NetworkOutput flat{std::vector<double>(15, 0.0), {0, 0, 0}};
  const LossTerms b = loss(flat, MoveDistribution({{Move{3}, 0.5}, {Move{9}, 0.5}}),
                           {1, -1, -1}, zeros, 1e-4);
  const double err = std::abs(b.total - (1.0 + std::numbers::ln2));
  return {exact && err <= 1e-6,
          fmt::format("perfect = l2 exactly: {}; worked example {:.7f} (err {:.1e})",
                      exact ? "yes" : "no", b.total, err)};
}

Outcome shapes() {
  const StateTensor a = encode_state(initial_state(tic_tac_mo()));
  const StateTensor b = encode_state(initial_state(connect3x3()));
  const bool ok = a.rows == 3 && a.cols == 5 && a.planes == 6 && a.data.size() == 90 &&
                  b.rows == 6 && b.cols == 7 && b.planes == 6 && b.data.size() == 252;
  return {ok, fmt::format("tictacmo {}x{}x{}, connect3x3 {}x{}x{}", a.rows, a.cols, a.planes,
                          b.rows, b.cols, b.planes)};
}

Outcome seat_protocol() {
  const MatchResult r =
      run_match({AgentSpec::mcts("a", 20), AgentSpec::mcts("b", 20), AgentSpec::random("c")},
                tic_tac_mo(), 1);
  std::map<std::pair<int, int>, int> count;
  for (const MatchGame& g : r.games) {
    for (int s = 0; s < 3; ++s) ++count[{g.seat_agent[s], s}];
  }
  bool twice = count.size() == 9;
  for (const auto& [_, n] : count) twice = twice && n == 2;
  return {r.games.size() == 6 && twice,
          fmt::format("{} games, every agent in every seat twice: {}", r.games.size(),
                      twice ? "yes" : "no")};
}

// Shared desk-scale run for the playing-strength and convergence checks.
struct DeskRun {
  fs::path dir;
  double train_seconds = 0.0;
  std::string error;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskRun r;
    r.dir = work_dir() / "desk";
    try {
      TrainOptions opt;
      opt.run = load_run_config(MPAZ_DESK_CONFIG);
      opt.iterations = 60;
      opt.out_dir = r.dir.string();
      opt.seed = 1;
      opt.quiet = true;
      const auto start = Clock::now();
      cmd_train(opt);
      r.train_seconds = seconds_since(start);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  }();
  return run;
}

Outcome desk_strength() {
  const DeskRun& run = desk_run();
  if (!run.error.empty()) return {false, "training failed: " + run.error};
  const RunConfig cfg = load_run_config(MPAZ_DESK_CONFIG);
  GauntletOptions g;
  g.checkpoint = checkpoint_path(run.dir.string(), 60);
  g.subject_rollouts = cfg.gauntlet.subject_rollouts;
  g.ladder = cfg.gauntlet.ladder;
  g.matches_per_rung = cfg.gauntlet.matches_per_rung;
  g.seed = 1;
  g.out_dir = (run.dir / "gauntlet").string();
  std::ostringstream sink;
  cmd_gauntlet(g, sink);
  const auto rows = parse_summary_csv(sink.str());
  const GauntletRow& row = rows.at(0);
  const int games = 6 * g.matches_per_rung;
  return {row.score_difference >= 0.0,
          fmt::format("60 iterations in {:.0f} s; alphazero(50) vs 2x mcts(50) over {} games: "
                      "subject {} vs opponent mean {}, difference {:+}",
                      run.train_seconds, games, row.subject_total, row.opponent_mean(),
                      row.score_difference)};
}

Outcome desk_convergence() {
  const DeskRun& run = desk_run();
  if (!run.error.empty()) return {false, "training failed: " + run.error};
  std::ifstream in(run.dir / "train_log.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> total;
  while (std::getline(in, line)) {
    total.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  if (total.size() < 3) return {false, "train log too short"};
  // Trailing moving average over five iterations.
  std::vector<double> smooth(total.size());
  for (size_t i = 0; i < total.size(); ++i) {
    const size_t lo = i >= 4 ? i - 4 : 0;
    smooth[i] = std::accumulate(total.begin() + lo, total.begin() + i + 1, 0.0) /
                static_cast<double>(i + 1 - lo);
  }
  const size_t third = smooth.size() / 3;
  const double first =
      std::accumulate(smooth.begin(), smooth.begin() + third, 0.0) / static_cast<double>(third);
  const double last =
      std::accumulate(smooth.end() - third, smooth.end(), 0.0) / static_cast<double>(third);
  return {last < first,
          fmt::format("smoothed total loss first third {:.4f}, last third {:.4f}", first, last)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MPAZ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome determinism() {
  const std::vector<std::string> files = {"train/train_log.csv", "eval/results.csv",
                                          "eval/summary.csv"};
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"det_a", "det_b"}) {
    const fs::path d = work_dir() / name;
    const std::string train =
        fmt::format("train --game tictacmo --iterations 3 --games 4 --steps 5 --channels 4 "
                    "--blocks 1 --rollouts 16 --batch-size 16 --seed 7 --quiet --out {}",
                    (d / "train").string());
    const std::string gauntlet = fmt::format(
        "gauntlet --checkpoint {} --rollouts 16 --ladder 8,16 --seed 7 --out {}",
        checkpoint_path((d / "train").string(), 3), (d / "eval").string());
    if (run_cli(train) != 0 || run_cli(gauntlet) != 0) return {false, "cli run failed"};
    std::map<std::string, std::string> contents;
    for (const auto& f : files) contents[f] = slurp(d / f);
    runs.push_back(std::move(contents));
  }
  int identical = 0;
  for (const auto& f : files) {
    identical += !runs[0][f].empty() && runs[0][f] == runs[1][f];
  }
  return {identical == static_cast<int>(files.size()),
          fmt::format("{}/{} CSVs byte-identical across two seeded runs", identical,
                      files.size())};
}

}  // namespace
}  // namespace mpaz

int main() {
  using mpaz::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"uct_tictactoe_non_losing", mpaz::uct_tictactoe},
      {"maxn_backup_trace", mpaz::backup_trace},
      {"gradient_fidelity", mpaz::gradient_check},
      {"loss_identity", mpaz::loss_identity},
      {"state_shapes", mpaz::shapes},
      {"seat_protocol", mpaz::seat_protocol},
      {"desk_tictacmo_strength", mpaz::desk_strength},
      {"desk_loss_convergence", mpaz::desk_convergence},
      {"seeded_cli_determinism", mpaz::determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::filesystem::remove_all(mpaz::work_dir());
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
