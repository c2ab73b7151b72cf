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

#ifndef MPAZ_TRAINING_HPP_
#define MPAZ_TRAINING_HPP_

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpaz/game.hpp"
#include "mpaz/network.hpp"

namespace mpaz {

struct TrainingSample {
  StateTensor state_tensor;
  std::vector<double> pi;  // dense over the action space
  ScoreVector z;
};

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps_per_iteration = 200;
  int games_per_iteration = 20;
  // Restrict the policy softmax to legal moves; false uses the full action space.
  bool masked_policy = true;
  std::optional<size_t> buffer_capacity;  // nullopt = unbounded
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Append-only sample store with optional FIFO eviction. All access goes
// through one mutex so self-play writers and the trainer can overlap.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::optional<size_t> capacity = std::nullopt)
      : capacity_(capacity) {}

  void add_game(const std::vector<TrainingSample>& samples) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& s : samples) samples_.push_back(s);
    if (capacity_) {
      while (samples_.size() > *capacity_) samples_.pop_front();
    }
  }

  // Uniform with replacement.
  std::vector<TrainingSample> sample_batch(size_t batch_size, Rng& rng) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (samples_.empty()) throw std::logic_error("sample_batch on an empty replay buffer");
    std::uniform_int_distribution<size_t> pick(0, samples_.size() - 1);
    std::vector<TrainingSample> batch;
    batch.reserve(batch_size);
    for (size_t i = 0; i < batch_size; ++i) batch.push_back(samples_[pick(rng)]);
    return batch;
  }

  size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return samples_.size();
  }

  std::optional<size_t> capacity() const { return capacity_; }

  std::vector<TrainingSample> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return {samples_.begin(), samples_.end()};
  }

 private:
  std::optional<size_t> capacity_;
  mutable std::mutex mu_;
  std::deque<TrainingSample> samples_;
};

inline nlohmann::json sample_to_json(const TrainingSample& s) {
  return {{"tensor", s.state_tensor.data}, {"pi", s.pi}, {"z", s.z}};
}

inline TrainingSample sample_from_json(const nlohmann::json& j, const GameDescriptor& g) {
  TrainingSample s;
  s.state_tensor = {g.board_rows, g.board_cols, g.encoding_planes,
                    j.at("tensor").get<std::vector<float>>()};
  s.pi = j.at("pi").get<std::vector<double>>();
  s.z = j.at("z").get<std::vector<double>>();
  if (s.state_tensor.data.size() !=
          static_cast<size_t>(g.num_cells()) * g.encoding_planes ||
      static_cast<int>(s.pi.size()) != g.action_space_size ||
      static_cast<int>(s.z.size()) != g.num_players) {
    throw std::runtime_error("replay sample does not match game " + g.name);
  }
  return s;
}

inline void save_replay(const ReplayBuffer& buffer, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& s : buffer.snapshot()) out << sample_to_json(s).dump() << "\n";
}

inline void load_replay(ReplayBuffer& buffer, const std::string& path,
                        const GameDescriptor& g) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<TrainingSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    samples.push_back(sample_from_json(nlohmann::json::parse(line), g));
  }
  buffer.add_game(samples);
}

template <typename T>
struct AdamState {
  Gradients<T> m;
  Gradients<T> v;
  int64_t step = 0;

  AdamState() = default;
  explicit AdamState(const Parameters<T>& params)
      : m(zero_gradients(params)), v(zero_gradients(params)) {}
};

inline LossTarget make_target(const TrainingSample& s, const GamePtr& game, bool masked) {
  LossTarget t{s.pi, s.z, std::vector<bool>(s.pi.size(), true)};
  if (masked) {
    t.mask = legal_mask(decode_state(game, s.state_tensor));
    // Terminal positions are never recorded, but keep the mask a superset
    // of the target support regardless.
    for (size_t a = 0; a < s.pi.size(); ++a) {
      if (s.pi[a] > 0.0) t.mask[a] = true;
    }
  }
  return t;
}

// One Adam step on the batch-mean loss. Returns the loss measured before
// the update. Throws TrainingError on a non-finite loss or gradient.
template <typename T>
LossTerms train_step(Parameters<T>& params, AdamState<T>& adam,
                     const std::vector<TrainingSample>& batch, const TrainConfig& config,
                     const GamePtr& game) {
  std::vector<StateTensor> inputs;
  std::vector<LossTarget> targets;
  inputs.reserve(batch.size());
  targets.reserve(batch.size());
  for (const auto& s : batch) {
    inputs.push_back(s.state_tensor);
    targets.push_back(make_target(s, game, config.masked_policy));
  }
  GradientResult<T> r = compute_gradients<T>(params, inputs, targets, config.l2);
  if (!std::isfinite(r.loss.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << adam.step << ": value_mse=" << r.loss.value_mse
        << " policy_ce=" << r.loss.policy_ce << " l2=" << r.loss.l2_penalty;
    throw TrainingError(msg.str());
  }
  if (adam.m.size() != params.size()) adam = AdamState<T>(params);
  adam.step += 1;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!is_trainable(params[i].kind)) continue;
    std::vector<T>& w = params[i].data;
    const std::vector<T>& g = r.grads[i];
    std::vector<T>& m = adam.m[i];
    std::vector<T>& v = adam.v[i];
    for (size_t j = 0; j < w.size(); ++j) {
      if (!std::isfinite(static_cast<double>(g[j]))) {
        throw TrainingError("non-finite gradient in " + params[i].name);
      }
      m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] = static_cast<T>(w[j] - config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps));
    }
  }
  update_running_stats(params, r);
  return r.loss;
}

template <typename T>
void save_optimizer(const AdamState<T>& adam, const Parameters<T>& params,
                    const std::string& manifest_path) {
  std::vector<NamedArray> arrays;
  for (size_t i = 0; i < params.size(); ++i) {
    arrays.push_back({"m." + params[i].name, params[i].shape,
                      std::vector<float>(adam.m[i].begin(), adam.m[i].end())});
  }
  for (size_t i = 0; i < params.size(); ++i) {
    arrays.push_back({"v." + params[i].name, params[i].shape,
                      std::vector<float>(adam.v[i].begin(), adam.v[i].end())});
  }
  write_array_bundle(manifest_path, arrays,
                     {{"format", "mpaz-adam-1"}, {"step", adam.step}});
}

template <typename T>
AdamState<T> load_optimizer(const std::string& manifest_path, const Parameters<T>& params) {
  ArrayBundle bundle = read_array_bundle(manifest_path);
  if (bundle.arrays.size() != 2 * params.size()) {
    throw std::runtime_error("optimizer state does not match parameters");
  }
  AdamState<T> adam(params);
  adam.step = bundle.header.at("step").get<int64_t>();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& m = bundle.arrays[i];
    const auto& v = bundle.arrays[params.size() + i];
    if (m.data.size() != params[i].data.size() || v.data.size() != params[i].data.size()) {
      throw std::runtime_error("optimizer array shape mismatch: " + params[i].name);
    }
    adam.m[i].assign(m.data.begin(), m.data.end());
    adam.v[i].assign(v.data.begin(), v.data.end());
  }
  return adam;
}

}  // namespace mpaz

#endif  // MPAZ_TRAINING_HPP_
