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

#ifndef MPAZ_MCTS_HPP_
#define MPAZ_MCTS_HPP_

// Score-vector (max^n) Monte Carlo tree search. Every edge accumulates the
// value component of the player who chose it, so the backup works for any
// number of players without sign flipping.
//
// Two searchers share the tree types:
//   * build_search_tree / run_search: network-guided, no playouts. Leaves are
//     scored by an Evaluator's value vector.
//   * uct_baseline_search: classic UCT with uniform-random playouts; the
//     control and opponent agent in evaluations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mpaz/game.hpp"

namespace mpaz {

using Rng = std::mt19937_64;

struct EdgeStats {
  int visits = 0;
  double total_value = 0.0;
  double mean_value = 0.0;
  double prior = 0.0;
};

struct SearchConfig {
  int rollouts_per_turn = 50;
  double c_puct = 3.0;
  double dirichlet_alpha = 1.0;
  double noise_epsilon = 0.25;
  // 0 selects the most visited move.
  double temperature = 1.0;
  // Multiplies the exploration bonus by sqrt(sum of sibling visits).
  bool standard_puct_variant = false;
  // Break exact selection ties uniformly at random instead of by index.
  bool jitter_ties = false;
  // Mix Dirichlet noise into the root priors of every search.
  bool root_prior_noise = false;
  // Exploration constant of the UCT baseline.
  double uct_c = std::numbers::sqrt2;
};

struct EvaluatorOutput {
  std::vector<double> policy_logits;
  ValueVector value;
};

// Maps an encoded position to (policy logits over the action space, value
// vector). Implementations must allow concurrent calls.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvaluatorOutput evaluate(const StateTensor& tensor) const = 0;
};

// Zero logits and a zero value vector.
class UniformEvaluator final : public Evaluator {
 public:
  UniformEvaluator(int action_space_size, int num_players)
      : actions_(action_space_size), players_(num_players) {}
  explicit UniformEvaluator(const GameDescriptor& g)
      : UniformEvaluator(g.action_space_size, g.num_players) {}

  EvaluatorOutput evaluate(const StateTensor&) const override {
    return {std::vector<double>(actions_, 0.0), ValueVector(players_, 0.0)};
  }

 private:
  int actions_;
  int players_;
};

// Probabilities over an explicit move list. Entries are sorted by move index
// and cover the legal moves of the searched state; zero entries are allowed.
class MoveDistribution {
 public:
  struct Entry {
    Move move;
    double prob;
  };

  MoveDistribution() = default;
  explicit MoveDistribution(std::vector<Entry> entries)
      : entries_(std::move(entries)) {}

  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double prob(Move m) const {
    for (const auto& e : entries_) {
      if (e.move == m) return e.prob;
    }
    return 0.0;
  }

  double total() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.prob;
    return s;
  }

  // Highest probability, lowest index on ties.
  Move argmax() const {
    if (entries_.empty()) throw std::logic_error("argmax of empty distribution");
    const Entry* best = &entries_.front();
    for (const auto& e : entries_) {
      if (e.prob > best->prob) best = &e;
    }
    return best->move;
  }

  Move sample(Rng& rng) const {
    if (entries_.empty()) throw std::logic_error("sample of empty distribution");
    std::uniform_real_distribution<double> u(0.0, total());
    double x = u(rng);
    for (const auto& e : entries_) {
      if (x < e.prob) return e.move;
      x -= e.prob;
    }
    // Rounding can walk past the end; fall back to the last nonzero entry.
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->prob > 0.0) return it->move;
    }
    return entries_.back().move;
  }

  std::vector<double> dense(int action_space_size) const {
    std::vector<double> out(action_space_size, 0.0);
    for (const auto& e : entries_) out[e.move.index] = e.prob;
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

struct SearchNode {
  explicit SearchNode(GameState s)
      : state(std::move(s)), terminal_scores(mpaz::terminal_scores(state)) {}

  PlayerId player_to_move() const { return state.to_move(); }
  bool is_terminal() const { return terminal_scores.has_value(); }
  int total_visits() const {
    int n = 0;
    for (const auto& e : edges) n += e.visits;
    return n;
  }

  GameState state;
  std::optional<ScoreVector> terminal_scores;
  bool expanded = false;
  std::vector<Move> moves;
  std::vector<EdgeStats> edges;
  std::vector<std::unique_ptr<SearchNode>> children;
  // Sum of every value vector backed up through this node.
  ValueVector value_sum;
  int backups = 0;
};

struct PathStep {
  SearchNode* node;
  size_t edge;
};

inline double puct_score(const EdgeStats& edge, double c_puct) {
  return edge.mean_value + c_puct * edge.prior / (1.0 + edge.visits);
}

inline double puct_score_standard(const EdgeStats& edge, double c_puct,
                                  int parent_visits) {
  return edge.mean_value + c_puct * edge.prior *
                               std::sqrt(static_cast<double>(parent_visits)) /
                               (1.0 + edge.visits);
}

namespace internal {

// Index of the maximum score; lowest index on exact ties unless rng is given,
// in which case ties are broken uniformly.
template <typename ScoreFn>
size_t argmax_edge(size_t count, ScoreFn&& score, Rng* rng) {
  double best = -std::numeric_limits<double>::infinity();
  size_t best_index = 0;
  int ties = 0;
  for (size_t i = 0; i < count; ++i) {
    const double s = score(i);
    if (s > best) {
      best = s;
      best_index = i;
      ties = 1;
    } else if (s == best && rng != nullptr) {
      // Reservoir sampling over the tied set.
      ++ties;
      if (std::uniform_int_distribution<int>(0, ties - 1)(*rng) == 0) {
        best_index = i;
      }
    }
  }
  return best_index;
}

inline void init_edges(SearchNode& node) {
  node.moves = legal_moves(node.state);
  node.edges.assign(node.moves.size(), EdgeStats{});
  node.children.clear();
  node.children.resize(node.moves.size());
  node.expanded = true;
}

inline SearchNode& child_at(SearchNode& node, size_t edge) {
  auto& slot = node.children[edge];
  if (!slot) {
    slot = std::make_unique<SearchNode>(apply_move(node.state, node.moves[edge]));
  }
  return *slot;
}

inline std::vector<double> sample_dirichlet(size_t k, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> eta(k);
  double sum = 0.0;
  for (double& x : eta) {
    x = gamma(rng);
    sum += x;
  }
  if (sum <= 0.0) {
    std::fill(eta.begin(), eta.end(), 1.0 / static_cast<double>(k));
  } else {
    for (double& x : eta) x /= sum;
  }
  return eta;
}

}  // namespace internal

inline size_t select_edge(const SearchNode& node, const SearchConfig& config,
                          Rng* rng = nullptr) {
  Rng* jitter = config.jitter_ties ? rng : nullptr;
  if (config.standard_puct_variant) {
    const int parent = node.total_visits();
    return internal::argmax_edge(
        node.edges.size(),
        [&](size_t i) {
          return puct_score_standard(node.edges[i], config.c_puct, parent);
        },
        jitter);
  }
  return internal::argmax_edge(
      node.edges.size(),
      [&](size_t i) { return puct_score(node.edges[i], config.c_puct); }, jitter);
}

inline Move select_child(const SearchNode& node, double c_puct) {
  SearchConfig config;
  config.c_puct = c_puct;
  return node.moves.at(select_edge(node, config));
}

// Softmax of logits restricted to mask; masked-out entries get exactly 0.
inline std::vector<double> masked_softmax(std::span<const double> logits,
                                          const std::vector<bool>& mask) {
  std::vector<double> p(logits.size(), 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) max_logit = std::max(max_logit, logits[i]);
  }
  if (!std::isfinite(max_logit)) return p;
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) {
      p[i] = std::exp(logits[i] - max_logit);
      sum += p[i];
    }
  }
  for (double& x : p) x /= sum;
  return p;
}

// Terminal nodes return their true score vector without touching the
// evaluator. Otherwise installs masked-softmax priors and returns the
// evaluator's value vector.
inline ValueVector expand_and_evaluate(SearchNode& node,
                                       const Evaluator& evaluator) {
  if (node.is_terminal()) {
    node.expanded = true;
    return *node.terminal_scores;
  }
  EvaluatorOutput out = evaluator.evaluate(encode_state(node.state));
  const int n = node.state.game().num_players;
  if (static_cast<int>(out.value.size()) != n ||
      static_cast<int>(out.policy_logits.size()) !=
          node.state.game().action_space_size) {
    throw std::runtime_error("evaluator output has wrong shape");
  }
  internal::init_edges(node);
  const std::vector<double> priors =
      masked_softmax(out.policy_logits, legal_mask(node.state));
  for (size_t i = 0; i < node.moves.size(); ++i) {
    node.edges[i].prior = priors[node.moves[i].index];
  }
  return std::move(out.value);
}

inline void backpropagate(std::span<const PathStep> path, const ValueVector& v) {
  for (const PathStep& step : path) {
    EdgeStats& e = step.node->edges[step.edge];
    e.visits += 1;
    e.total_value += v[step.node->player_to_move()];
    e.mean_value = e.total_value / e.visits;
    SearchNode& node = *step.node;
    if (node.value_sum.empty()) node.value_sum.assign(v.size(), 0.0);
    for (size_t i = 0; i < v.size(); ++i) node.value_sum[i] += v[i];
    ++node.backups;
  }
}

// Mean of the value vectors backed up through the node.
inline ValueVector root_value(const SearchNode& node) {
  ValueVector out(node.state.game().num_players, 0.0);
  if (node.backups == 0) return out;
  for (size_t i = 0; i < out.size(); ++i) out[i] = node.value_sum[i] / node.backups;
  return out;
}

// Follows the most visited edge while the child has at least min_visits
// visits, then returns the mean backed-up vector there (or the true scores
// if the line reaches a terminal node).
inline ValueVector principal_variation_value(const SearchNode& root, int min_visits) {
  const SearchNode* node = &root;
  while (true) {
    if (node->is_terminal()) return *node->terminal_scores;
    size_t best = 0;
    int best_visits = -1;
    for (size_t i = 0; i < node->edges.size(); ++i) {
      if (node->edges[i].visits > best_visits) {
        best_visits = node->edges[i].visits;
        best = i;
      }
    }
    if (best_visits < min_visits || !node->children[best]) return root_value(*node);
    node = node->children[best].get();
  }
}

// pi(a) proportional to N(a)^(1/temperature); temperature 0 is a point mass on
// the most visited move (lowest index on ties).
inline MoveDistribution visit_distribution(const SearchNode& root,
                                           double temperature) {
  std::vector<MoveDistribution::Entry> entries;
  entries.reserve(root.moves.size());
  int max_visits = 0;
  size_t best = 0;
  for (size_t i = 0; i < root.edges.size(); ++i) {
    if (root.edges[i].visits > max_visits) {
      max_visits = root.edges[i].visits;
      best = i;
    }
  }
  if (temperature <= 0.0 || max_visits == 0) {
    for (size_t i = 0; i < root.moves.size(); ++i) {
      entries.push_back({root.moves[i], i == best ? 1.0 : 0.0});
    }
    return MoveDistribution(std::move(entries));
  }
  double sum = 0.0;
  for (size_t i = 0; i < root.moves.size(); ++i) {
    const double ratio = static_cast<double>(root.edges[i].visits) / max_visits;
    const double w = temperature == 1.0 ? ratio : std::pow(ratio, 1.0 / temperature);
    entries.push_back({root.moves[i], w});
    sum += w;
  }
  for (auto& e : entries) e.prob /= sum;
  return MoveDistribution(std::move(entries));
}

inline MoveDistribution apply_root_noise(const MoveDistribution& pi,
                                         double alpha, double epsilon,
                                         Rng& rng) {
  if (epsilon == 0.0 || pi.empty()) return pi;
  const std::vector<double> eta =
      internal::sample_dirichlet(pi.size(), alpha, rng);
  std::vector<MoveDistribution::Entry> out = pi.entries();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].prob = (1.0 - epsilon) * out[i].prob + epsilon * eta[i];
  }
  return MoveDistribution(std::move(out));
}

// Runs config.rollouts_per_turn select/expand/backup iterations from a fresh
// root. Root expansion is not counted as a rollout, so the root's edge visits
// sum to rollouts_per_turn.
inline std::unique_ptr<SearchNode> build_search_tree(const GameState& state,
                                                     const Evaluator& evaluator,
                                                     const SearchConfig& config,
                                                     Rng& rng) {
  if (state.is_terminal()) {
    throw std::invalid_argument("search called on a terminal state");
  }
  if (config.rollouts_per_turn < 1) {
    throw std::invalid_argument("rollouts_per_turn must be >= 1");
  }
  auto root = std::make_unique<SearchNode>(state);
  expand_and_evaluate(*root, evaluator);
  if (config.root_prior_noise) {
    const std::vector<double> eta = internal::sample_dirichlet(
        root->edges.size(), config.dirichlet_alpha, rng);
    for (size_t i = 0; i < eta.size(); ++i) {
      root->edges[i].prior = (1.0 - config.noise_epsilon) * root->edges[i].prior +
                             config.noise_epsilon * eta[i];
    }
  }
  std::vector<PathStep> path;
  for (int r = 0; r < config.rollouts_per_turn; ++r) {
    path.clear();
    SearchNode* node = root.get();
    ValueVector value;
    while (true) {
      const size_t edge = select_edge(*node, config, &rng);
      path.push_back({node, edge});
      SearchNode& child = internal::child_at(*node, edge);
      if (child.is_terminal()) {
        value = *child.terminal_scores;
        break;
      }
      if (!child.expanded) {
        value = expand_and_evaluate(child, evaluator);
        break;
      }
      node = &child;
    }
    backpropagate(path, value);
  }
  return root;
}

inline MoveDistribution run_search(const GameState& state,
                                   const Evaluator& evaluator,
                                   const SearchConfig& config, Rng& rng) {
  auto root = build_search_tree(state, evaluator, config, rng);
  return visit_distribution(*root, config.temperature);
}

inline ScoreVector random_playout(GameState state, Rng& rng) {
  while (!state.is_terminal()) {
    const std::vector<Move> moves = legal_moves(state);
    std::uniform_int_distribution<size_t> pick(0, moves.size() - 1);
    state = apply_move(state, moves[pick(rng)]);
  }
  return *terminal_scores(state);
}

inline double uct_score(const EdgeStats& edge, double c, int parent_visits) {
  return edge.mean_value +
         c * std::sqrt(std::log(static_cast<double>(parent_visits)) / edge.visits);
}

// Classic UCT: untried moves first (in index order), then
// Q + c*sqrt(ln N_parent / N_child); leaves scored by one random playout.
inline std::unique_ptr<SearchNode> build_uct_tree(const GameState& state,
                                                  const SearchConfig& config,
                                                  Rng& rng) {
  if (state.is_terminal()) {
    throw std::invalid_argument("search called on a terminal state");
  }
  if (config.rollouts_per_turn < 1) {
    throw std::invalid_argument("rollouts_per_turn must be >= 1");
  }
  auto root = std::make_unique<SearchNode>(state);
  std::vector<PathStep> path;
  Rng* jitter = config.jitter_ties ? &rng : nullptr;
  for (int r = 0; r < config.rollouts_per_turn; ++r) {
    path.clear();
    SearchNode* node = root.get();
    ValueVector value;
    while (true) {
      if (!node->expanded) internal::init_edges(*node);
      size_t edge = node->edges.size();
      for (size_t i = 0; i < node->edges.size(); ++i) {
        if (node->edges[i].visits == 0) {
          edge = i;
          break;
        }
      }
      const bool fresh = edge != node->edges.size();
      if (!fresh) {
        const int parent = node->total_visits();
        edge = internal::argmax_edge(
            node->edges.size(),
            [&](size_t i) { return uct_score(node->edges[i], config.uct_c, parent); },
            jitter);
      }
      path.push_back({node, edge});
      SearchNode& child = internal::child_at(*node, edge);
      if (child.is_terminal()) {
        value = *child.terminal_scores;
        break;
      }
      if (fresh) {
        value = random_playout(child.state, rng);
        break;
      }
      node = &child;
    }
    backpropagate(path, value);
  }
  return root;
}

inline MoveDistribution uct_baseline_search(const GameState& state,
                                            const SearchConfig& config, Rng& rng) {
  auto root = build_uct_tree(state, config, rng);
  return visit_distribution(*root, config.temperature);
}

}  // namespace mpaz

#endif  // MPAZ_MCTS_HPP_
