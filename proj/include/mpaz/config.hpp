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

#ifndef MPAZ_CONFIG_HPP_
#define MPAZ_CONFIG_HPP_

// One JSON document configures every subcommand:
//
// {
//   "game": "tictacmo",                       // or "connect3x3"
//   "network":  { "channels": 64, "num_blocks": 8, "se_reduction": 8,
//                 "value_hidden": 64, "l2_coefficient": 1e-4 },
//   "train":    { "batch_size": 64, "learning_rate": 1e-3, "l2": 1e-4,
//                 "steps_per_iteration": 200, "games_per_iteration": 20,
//                 "masked_policy": true, "buffer_capacity": null },
//   "search":   { "rollouts_per_turn": 50, "c_puct": 3.0, "dirichlet_alpha": 1.0,
//                 "noise_epsilon": 0.25, "temperature": 1.0,
//                 "standard_puct_variant": false, "root_prior_noise": false,
//                 "uct_c": 1.4142135623730951 },
//   "selfplay": { "first_move_noise": true, "argmax_from_move": -1 },
//   "gauntlet": { "subject_rollouts": 50, "ladder": [50, 100, 200],
//                 "matches_per_rung": 1 }
// }
//
// Every key is optional; missing keys keep their defaults. Unknown keys are
// rejected so typos fail loudly.

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpaz/game.hpp"
#include "mpaz/mcts.hpp"
#include "mpaz/network.hpp"
#include "mpaz/selfplay.hpp"
#include "mpaz/training.hpp"

namespace mpaz {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GauntletSettings {
  int subject_rollouts = 50;
  std::vector<int> ladder{50, 100, 200, 400, 800};
  int matches_per_rung = 1;
};

struct RunConfig {
  std::string game;
  int channels = 64;
  int num_blocks = 8;
  int se_reduction = 8;
  int value_hidden = 64;
  TrainConfig train;
  SelfPlayConfig selfplay;
  GauntletSettings gauntlet;

  NetworkConfig network_config() const {
    NetworkConfig c = NetworkConfig::for_game(*game_by_name(game), channels, num_blocks);
    c.se_reduction = se_reduction;
    c.value_hidden = value_hidden;
    c.l2_coefficient = train.l2;
    return c;
  }
};

namespace internal {

inline void check_keys(const nlohmann::json& j, const std::string& section,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
    }
  }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

}  // namespace internal

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using internal::check_keys;
  using internal::read;
  RunConfig c;
  try {
    check_keys(j, "root", {"game", "network", "train", "search", "selfplay", "gauntlet"});
    read(j, "game", c.game);
    if (j.contains("network")) {
      const auto& n = j["network"];
      check_keys(n, "network",
                 {"channels", "num_blocks", "se_reduction", "value_hidden", "l2_coefficient"});
      read(n, "channels", c.channels);
      read(n, "num_blocks", c.num_blocks);
      read(n, "se_reduction", c.se_reduction);
      read(n, "value_hidden", c.value_hidden);
      read(n, "l2_coefficient", c.train.l2);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, "train",
                 {"batch_size", "learning_rate", "l2", "adam_beta1", "adam_beta2", "adam_eps",
                  "steps_per_iteration", "games_per_iteration", "masked_policy",
                  "buffer_capacity"});
      read(t, "batch_size", c.train.batch_size);
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "l2", c.train.l2);
      read(t, "adam_beta1", c.train.adam_beta1);
      read(t, "adam_beta2", c.train.adam_beta2);
      read(t, "adam_eps", c.train.adam_eps);
      read(t, "steps_per_iteration", c.train.steps_per_iteration);
      read(t, "games_per_iteration", c.train.games_per_iteration);
      read(t, "masked_policy", c.train.masked_policy);
      if (t.contains("buffer_capacity") && !t["buffer_capacity"].is_null()) {
        c.train.buffer_capacity = t["buffer_capacity"].get<size_t>();
      }
    }
    if (j.contains("search")) {
      const auto& s = j["search"];
      check_keys(s, "search",
                 {"rollouts_per_turn", "c_puct", "dirichlet_alpha", "noise_epsilon",
                  "temperature", "standard_puct_variant", "jitter_ties", "root_prior_noise",
                  "uct_c"});
      SearchConfig& sc = c.selfplay.search;
      read(s, "rollouts_per_turn", sc.rollouts_per_turn);
      read(s, "c_puct", sc.c_puct);
      read(s, "dirichlet_alpha", sc.dirichlet_alpha);
      read(s, "noise_epsilon", sc.noise_epsilon);
      read(s, "temperature", sc.temperature);
      read(s, "standard_puct_variant", sc.standard_puct_variant);
      read(s, "jitter_ties", sc.jitter_ties);
      read(s, "root_prior_noise", sc.root_prior_noise);
      read(s, "uct_c", sc.uct_c);
    }
    if (j.contains("selfplay")) {
      const auto& s = j["selfplay"];
      check_keys(s, "selfplay", {"first_move_noise", "argmax_from_move"});
      read(s, "first_move_noise", c.selfplay.first_move_noise);
      read(s, "argmax_from_move", c.selfplay.argmax_from_move);
    }
    if (j.contains("gauntlet")) {
      const auto& g = j["gauntlet"];
      check_keys(g, "gauntlet", {"subject_rollouts", "ladder", "matches_per_rung"});
      read(g, "subject_rollouts", c.gauntlet.subject_rollouts);
      read(g, "ladder", c.gauntlet.ladder);
      read(g, "matches_per_rung", c.gauntlet.matches_per_rung);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (c.selfplay.search.rollouts_per_turn < 1) throw ConfigError("rollouts_per_turn must be >= 1");
  if (c.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.selfplay.search.noise_epsilon < 0.0 || c.selfplay.search.noise_epsilon > 1.0) {
    throw ConfigError("noise_epsilon must be in [0, 1]");
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace mpaz

#endif  // MPAZ_CONFIG_HPP_
