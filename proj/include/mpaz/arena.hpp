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

#ifndef MPAZ_ARENA_HPP_
#define MPAZ_ARENA_HPP_

// Agent evaluation: seat-permuted matches and rollout ladders.
//
// A match between n agents plays one game for every assignment of agents to
// seats (n! games), so each agent sits in each seat (n-1)! times. A gauntlet
// plays one subject against n-1 copies of an MCTS agent whose rollout budget
// climbs a ladder.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mpaz/game.hpp"
#include "mpaz/mcts.hpp"
#include "mpaz/network.hpp"
#include "mpaz/util.hpp"

namespace mpaz {

enum class AgentKind { kAlphaZero, kMcts, kRandom, kHumanProxy };

using HumanMoveFn = std::function<Move(const GameState&)>;

struct AgentSpec {
  AgentKind kind = AgentKind::kMcts;
  std::string label;
  int rollouts = 50;
  // AlphaZero only; shared read-only snapshot.
  std::shared_ptr<const Parameters<float>> params;
  std::string checkpoint;
  double c_puct = 3.0;
  bool standard_puct_variant = false;
  HumanMoveFn human;

  static AgentSpec alphazero(std::string label, std::shared_ptr<const Parameters<float>> p,
                             int rollouts = 50) {
    AgentSpec s;
    s.kind = AgentKind::kAlphaZero;
    s.label = std::move(label);
    s.params = std::move(p);
    s.rollouts = rollouts;
    return s;
  }
  static AgentSpec mcts(std::string label, int rollouts) {
    AgentSpec s;
    s.kind = AgentKind::kMcts;
    s.label = std::move(label);
    s.rollouts = rollouts;
    return s;
  }
  static AgentSpec random(std::string label) {
    AgentSpec s;
    s.kind = AgentKind::kRandom;
    s.label = std::move(label);
    return s;
  }
  static AgentSpec human_proxy(std::string label, HumanMoveFn fn) {
    AgentSpec s;
    s.kind = AgentKind::kHumanProxy;
    s.label = std::move(label);
    s.human = std::move(fn);
    return s;
  }
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual Move select_move(const GameState& state, Rng& rng) = 0;
};

// Search agents play the argmax of root visits (temperature 0).
class AlphaZeroAgent final : public Agent {
 public:
  AlphaZeroAgent(std::shared_ptr<const Parameters<float>> params, SearchConfig config)
      : evaluator_(std::move(params)), config_(config) {}
  Move select_move(const GameState& state, Rng& rng) override {
    return run_search(state, evaluator_, config_, rng).argmax();
  }

 private:
  NetworkEvaluator<float> evaluator_;
  SearchConfig config_;
};

class MctsAgent final : public Agent {
 public:
  explicit MctsAgent(SearchConfig config) : config_(config) {}
  Move select_move(const GameState& state, Rng& rng) override {
    return uct_baseline_search(state, config_, rng).argmax();
  }

 private:
  SearchConfig config_;
};

class RandomAgent final : public Agent {
 public:
  Move select_move(const GameState& state, Rng& rng) override {
    const std::vector<Move> moves = legal_moves(state);
    return moves[std::uniform_int_distribution<size_t>(0, moves.size() - 1)(rng)];
  }
};

class HumanProxyAgent final : public Agent {
 public:
  explicit HumanProxyAgent(HumanMoveFn fn) : fn_(std::move(fn)) {}
  Move select_move(const GameState& state, Rng&) override { return fn_(state); }

 private:
  HumanMoveFn fn_;
};

inline SearchConfig evaluation_search_config(const AgentSpec& spec) {
  if (spec.rollouts < 1) throw std::invalid_argument("agent rollouts must be >= 1");
  SearchConfig c;
  c.rollouts_per_turn = spec.rollouts;
  c.c_puct = spec.c_puct;
  c.standard_puct_variant = spec.standard_puct_variant;
  c.temperature = 0.0;
  return c;
}

inline std::unique_ptr<Agent> make_agent(const AgentSpec& spec) {
  switch (spec.kind) {
    case AgentKind::kAlphaZero:
      if (!spec.params) throw std::invalid_argument("alphazero agent without parameters");
      return std::make_unique<AlphaZeroAgent>(spec.params, evaluation_search_config(spec));
    case AgentKind::kMcts:
      return std::make_unique<MctsAgent>(evaluation_search_config(spec));
    case AgentKind::kRandom:
      return std::make_unique<RandomAgent>();
    case AgentKind::kHumanProxy:
      if (!spec.human) throw std::invalid_argument("human-proxy agent without input");
      return std::make_unique<HumanProxyAgent>(spec.human);
  }
  throw std::logic_error("unknown agent kind");
}

struct MatchGame {
  // seat_agent[s] = index (into MatchResult::labels) of the agent in seat s.
  std::vector<int> seat_agent;
  ScoreVector seat_scores;
  std::vector<Move> moves;
};

struct MatchResult {
  std::vector<std::string> labels;
  std::vector<MatchGame> games;
  std::vector<double> totals;  // per agent, summed over games

  double total_of(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return totals[i];
    }
    throw std::invalid_argument("unknown agent label: " + label);
  }
};

inline std::string permutation_string(const std::vector<int>& perm) {
  std::string s;
  for (size_t i = 0; i < perm.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(perm[i]);
  }
  return s;
}

// Plays one game; seat s is controlled by agents[seat_agent[s]]. Each seat
// draws from its own RNG stream.
inline MatchGame play_game(const GamePtr& game, std::vector<std::unique_ptr<Agent>>& agents,
                           const std::vector<int>& seat_agent, uint64_t seed) {
  std::vector<Rng> seat_rngs;
  for (size_t s = 0; s < seat_agent.size(); ++s) {
    seat_rngs.emplace_back(derive_seed(seed, {s}));
  }
  MatchGame out;
  out.seat_agent = seat_agent;
  GameState state = initial_state(game);
  while (!state.is_terminal()) {
    const int seat = state.to_move();
    const Move m = agents[seat_agent[seat]]->select_move(state, seat_rngs[seat]);
    out.moves.push_back(m);
    state = apply_move(state, m);
  }
  out.seat_scores = *terminal_scores(state);
  return out;
}

inline MatchResult run_match(const std::vector<AgentSpec>& specs, const GamePtr& game,
                             uint64_t seed, int threads = 1) {
  const int n = game->num_players;
  if (static_cast<int>(specs.size()) != n) {
    throw std::invalid_argument(
        fmt::format("run_match needs exactly {} agents, got {}", n, specs.size()));
  }
  MatchResult result;
  for (const auto& s : specs) result.labels.push_back(s.label);
  std::vector<std::vector<int>> perms;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  result.games.resize(perms.size());
  parallel_for(perms.size(), threads, [&](size_t g) {
    // Agents hold per-search scratch only, but build one set per game so
    // parallel games never share an instance.
    std::vector<std::unique_ptr<Agent>> agents;
    for (const auto& s : specs) agents.push_back(make_agent(s));
    result.games[g] = play_game(game, agents, perms[g], derive_seed(seed, {g}));
  });
  result.totals.assign(n, 0.0);
  for (const MatchGame& g : result.games) {
    for (int s = 0; s < n; ++s) result.totals[g.seat_agent[s]] += g.seat_scores[s];
  }
  return result;
}

// Subject total minus the mean of the other agents' totals.
inline double score_difference(const MatchResult& result, const std::string& subject) {
  const double mine = result.total_of(subject);
  double others = 0.0;
  int count = 0;
  for (size_t i = 0; i < result.labels.size(); ++i) {
    if (result.labels[i] == subject) continue;
    others += result.totals[i];
    ++count;
  }
  return count == 0 ? mine : mine - others / count;
}

struct GauntletConfig {
  AgentSpec subject;
  std::vector<int> opponent_rollout_ladder;
  // Seeded matches per ladder rung; totals are summed over them.
  int matches_per_rung = 1;
  uint64_t seed = 0;
  int threads = 1;
};

struct GauntletRow {
  int opponent_rollouts = 0;
  double subject_total = 0.0;
  std::vector<double> opponent_totals;
  double score_difference = 0.0;

  double opponent_mean() const {
    if (opponent_totals.empty()) return 0.0;
    return std::accumulate(opponent_totals.begin(), opponent_totals.end(), 0.0) /
           static_cast<double>(opponent_totals.size());
  }
};

struct GauntletResult {
  std::string game;
  std::string subject_label;
  std::vector<GauntletRow> rows;
  // (match_id, opponent_rollouts, match)
  struct Match {
    int match_id;
    int opponent_rollouts;
    MatchResult result;
  };
  std::vector<Match> matches;
};

inline void validate_ladder(const std::vector<int>& ladder) {
  if (ladder.empty()) throw std::invalid_argument("empty opponent ladder");
  for (size_t i = 0; i < ladder.size(); ++i) {
    if (ladder[i] < 1) throw std::invalid_argument("ladder rollouts must be >= 1");
    if (i && ladder[i] <= ladder[i - 1]) {
      throw std::invalid_argument("opponent ladder must be strictly increasing");
    }
  }
}

inline GauntletResult run_gauntlet(const GauntletConfig& config, const GamePtr& game) {
  validate_ladder(config.opponent_rollout_ladder);
  if (config.matches_per_rung < 1) throw std::invalid_argument("matches_per_rung must be >= 1");
  const int n = game->num_players;
  GauntletResult out;
  out.game = game->name;
  out.subject_label = config.subject.label;
  int match_id = 0;
  for (size_t rung = 0; rung < config.opponent_rollout_ladder.size(); ++rung) {
    const int rollouts = config.opponent_rollout_ladder[rung];
    std::vector<AgentSpec> specs{config.subject};
    for (int o = 1; o < n; ++o) {
      specs.push_back(AgentSpec::mcts(fmt::format("mcts{}_{}", rollouts, o), rollouts));
    }
    GauntletRow row;
    row.opponent_rollouts = rollouts;
    row.opponent_totals.assign(n - 1, 0.0);
    for (int m = 0; m < config.matches_per_rung; ++m) {
      const uint64_t seed =
          derive_seed(config.seed, {static_cast<uint64_t>(rung), static_cast<uint64_t>(m)});
      MatchResult r = run_match(specs, game, seed, config.threads);
      row.subject_total += r.totals[0];
      for (int o = 1; o < n; ++o) row.opponent_totals[o - 1] += r.totals[o];
      out.matches.push_back({match_id++, rollouts, std::move(r)});
    }
    row.score_difference = row.subject_total - row.opponent_mean();
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string results_csv(const GauntletResult& g) {
  std::ostringstream os;
  os << "game,match_id,opponent_rollouts,permutation";
  const size_t n = g.matches.empty() ? 0 : g.matches.front().result.labels.size();
  for (size_t s = 0; s < n; ++s) os << ",seat" << s;
  for (size_t s = 0; s < n; ++s) os << ",score_seat" << s;
  os << "\n";
  for (const auto& m : g.matches) {
    for (const MatchGame& game : m.result.games) {
      os << g.game << ',' << m.match_id << ',' << m.opponent_rollouts << ','
         << permutation_string(game.seat_agent);
      for (int a : game.seat_agent) os << ',' << m.result.labels[a];
      for (double z : game.seat_scores) os << ',' << fmt::format("{}", z);
      os << "\n";
    }
  }
  return os.str();
}

inline std::string summary_csv(const GauntletResult& g) {
  std::ostringstream os;
  os << "opponent_rollouts,subject_total,opp_mean_total,score_difference";
  const size_t opps = g.rows.empty() ? 0 : g.rows.front().opponent_totals.size();
  for (size_t o = 0; o < opps; ++o) os << ",opp" << (o + 1) << "_total";
  os << "\n";
  for (const auto& r : g.rows) {
    os << r.opponent_rollouts << ',' << fmt::format("{}", r.subject_total) << ','
       << fmt::format("{}", r.opponent_mean()) << ',' << fmt::format("{}", r.score_difference);
    for (double t : r.opponent_totals) os << ',' << fmt::format("{}", t);
    os << "\n";
  }
  return os.str();
}

// Parses a summary CSV back into rows (for plotting).
inline std::vector<GauntletRow> parse_summary_csv(const std::string& text) {
  std::vector<GauntletRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() < 4) throw std::runtime_error("malformed summary row: " + line);
    GauntletRow r;
    r.opponent_rollouts = std::stoi(cols[0]);
    r.subject_total = std::stod(cols[1]);
    r.score_difference = std::stod(cols[3]);
    for (size_t i = 4; i < cols.size(); ++i) r.opponent_totals.push_back(std::stod(cols[i]));
    if (r.opponent_totals.empty()) r.opponent_totals.push_back(std::stod(cols[2]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace mpaz

#endif  // MPAZ_ARENA_HPP_
