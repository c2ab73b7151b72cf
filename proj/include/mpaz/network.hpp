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

#ifndef MPAZ_NETWORK_HPP_
#define MPAZ_NETWORK_HPP_

// Two-headed squeeze-and-excitation residual network with analytic
// gradients. The scalar type is a template parameter: float for play and
// training, double for gradient checking.
//
// Architecture (NCHW internally):
//   stem:   conv3x3(in -> C) -> norm -> relu
//   block:  u = x * SE(x);  y = x + conv3x3(relu(norm(conv3x3(relu(norm(u))))))
//           SE(x) = sigmoid(W2 relu(W1 avgpool(x) + b1) + b2)
//   policy: conv1x1(C -> 2) -> norm -> relu -> fc -> logits
//   value:  conv1x1(C -> 1) -> norm -> relu -> fc -> relu -> fc -> tanh
// Convolutions carry no bias. Norm layers use batch statistics in training
// mode and running averages in inference mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpaz/game.hpp"
#include "mpaz/mcts.hpp"

namespace mpaz {

struct NetworkConfig {
  int input_planes = 6;
  int board_rows = 3;
  int board_cols = 5;
  int channels = 64;
  int num_blocks = 8;
  int se_reduction = 8;
  int policy_size = 15;
  int value_size = 3;
  int value_hidden = 64;
  double l2_coefficient = 1e-4;
  double norm_momentum = 0.9;
  double norm_epsilon = 1e-5;

  static constexpr int kPolicyPlanes = 2;
  static constexpr int kValuePlanes = 1;

  static NetworkConfig for_game(const GameDescriptor& g, int channels = 64,
                                int num_blocks = 8) {
    NetworkConfig c;
    c.input_planes = g.encoding_planes;
    c.board_rows = g.board_rows;
    c.board_cols = g.board_cols;
    c.channels = channels;
    c.num_blocks = num_blocks;
    c.policy_size = g.action_space_size;
    c.value_size = g.num_players;
    return c;
  }

  int cells() const { return board_rows * board_cols; }
  int se_hidden() const { return std::max(1, channels / se_reduction); }

  void validate() const {
    if (input_planes <= 0 || board_rows <= 0 || board_cols <= 0 ||
        channels <= 0 || num_blocks < 0 || se_reduction <= 0 ||
        policy_size <= 0 || value_size <= 0 || value_hidden <= 0 ||
        l2_coefficient < 0.0) {
      throw std::invalid_argument("NetworkConfig: all sizes must be positive");
    }
  }

  bool operator==(const NetworkConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"input_planes", c.input_planes}, {"board_rows", c.board_rows},
       {"board_cols", c.board_cols},     {"channels", c.channels},
       {"num_blocks", c.num_blocks},     {"se_reduction", c.se_reduction},
       {"policy_size", c.policy_size},   {"value_size", c.value_size},
       {"value_hidden", c.value_hidden}, {"l2_coefficient", c.l2_coefficient},
       {"norm_momentum", c.norm_momentum}, {"norm_epsilon", c.norm_epsilon}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  NetworkConfig d;
  c.input_planes = j.value("input_planes", d.input_planes);
  c.board_rows = j.value("board_rows", d.board_rows);
  c.board_cols = j.value("board_cols", d.board_cols);
  c.channels = j.value("channels", d.channels);
  c.num_blocks = j.value("num_blocks", d.num_blocks);
  c.se_reduction = j.value("se_reduction", d.se_reduction);
  c.policy_size = j.value("policy_size", d.policy_size);
  c.value_size = j.value("value_size", d.value_size);
  c.value_hidden = j.value("value_hidden", d.value_hidden);
  c.l2_coefficient = j.value("l2_coefficient", d.l2_coefficient);
  c.norm_momentum = j.value("norm_momentum", d.norm_momentum);
  c.norm_epsilon = j.value("norm_epsilon", d.norm_epsilon);
}

enum class ParamKind { kWeight, kBias, kNormScale, kNormShift, kRunningMean, kRunningVar };

inline bool is_trainable(ParamKind k) {
  return k != ParamKind::kRunningMean && k != ParamKind::kRunningVar;
}

template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  ParamKind kind;
  std::vector<T> data;
};

// Array indices in enumeration order. A norm index points at its scale;
// shift, running mean and running variance follow it.
struct NetworkLayout {
  struct Block {
    size_t se_reduce_w, se_reduce_b, se_expand_w, se_expand_b;
    size_t norm1, conv1, norm2, conv2;
  };
  size_t stem_conv = 0, stem_norm = 0;
  std::vector<Block> blocks;
  size_t policy_conv = 0, policy_norm = 0, policy_fc_w = 0, policy_fc_b = 0;
  size_t value_conv = 0, value_norm = 0, value_fc1_w = 0, value_fc1_b = 0;
  size_t value_fc2_w = 0, value_fc2_b = 0;
};

template <typename T>
class Parameters {
 public:
  Parameters() = default;

  // Zero-filled arrays in the canonical order.
  explicit Parameters(const NetworkConfig& config) : config_(config) {
    config_.validate();
    const int C = config.channels;
    const int R = config.se_hidden();
    const int HW = config.cells();
    auto add = [&](std::string name, std::vector<int> shape, ParamKind kind) {
      size_t count = 1;
      for (int d : shape) count *= static_cast<size_t>(d);
      arrays_.push_back({std::move(name), std::move(shape), kind,
                         std::vector<T>(count, T(0))});
      return arrays_.size() - 1;
    };
    auto add_norm = [&](const std::string& prefix, int channels) {
      const size_t first = add(prefix + ".scale", {channels}, ParamKind::kNormScale);
      add(prefix + ".shift", {channels}, ParamKind::kNormShift);
      add(prefix + ".running_mean", {channels}, ParamKind::kRunningMean);
      add(prefix + ".running_var", {channels}, ParamKind::kRunningVar);
      return first;
    };
    layout_.stem_conv = add("stem.conv.weight", {C, config.input_planes, 3, 3},
                            ParamKind::kWeight);
    layout_.stem_norm = add_norm("stem.norm", C);
    for (int b = 0; b < config.num_blocks; ++b) {
      const std::string p = "block" + std::to_string(b);
      NetworkLayout::Block blk{};
      blk.se_reduce_w = add(p + ".se.reduce.weight", {R, C}, ParamKind::kWeight);
      blk.se_reduce_b = add(p + ".se.reduce.bias", {R}, ParamKind::kBias);
      blk.se_expand_w = add(p + ".se.expand.weight", {C, R}, ParamKind::kWeight);
      blk.se_expand_b = add(p + ".se.expand.bias", {C}, ParamKind::kBias);
      blk.norm1 = add_norm(p + ".norm1", C);
      blk.conv1 = add(p + ".conv1.weight", {C, C, 3, 3}, ParamKind::kWeight);
      blk.norm2 = add_norm(p + ".norm2", C);
      blk.conv2 = add(p + ".conv2.weight", {C, C, 3, 3}, ParamKind::kWeight);
      layout_.blocks.push_back(blk);
    }
    const int PP = NetworkConfig::kPolicyPlanes;
    const int VP = NetworkConfig::kValuePlanes;
    layout_.policy_conv = add("policy.conv.weight", {PP, C, 1, 1}, ParamKind::kWeight);
    layout_.policy_norm = add_norm("policy.norm", PP);
    layout_.policy_fc_w = add("policy.fc.weight", {config.policy_size, PP * HW},
                              ParamKind::kWeight);
    layout_.policy_fc_b = add("policy.fc.bias", {config.policy_size}, ParamKind::kBias);
    layout_.value_conv = add("value.conv.weight", {VP, C, 1, 1}, ParamKind::kWeight);
    layout_.value_norm = add_norm("value.norm", VP);
    layout_.value_fc1_w = add("value.fc1.weight", {config.value_hidden, VP * HW},
                              ParamKind::kWeight);
    layout_.value_fc1_b = add("value.fc1.bias", {config.value_hidden}, ParamKind::kBias);
    layout_.value_fc2_w = add("value.fc2.weight", {config.value_size, config.value_hidden},
                              ParamKind::kWeight);
    layout_.value_fc2_b = add("value.fc2.bias", {config.value_size}, ParamKind::kBias);
  }

  const NetworkConfig& config() const { return config_; }
  const NetworkLayout& layout() const { return layout_; }
  std::vector<ParamArray<T>>& arrays() { return arrays_; }
  const std::vector<ParamArray<T>>& arrays() const { return arrays_; }
  ParamArray<T>& operator[](size_t i) { return arrays_[i]; }
  const ParamArray<T>& operator[](size_t i) const { return arrays_[i]; }
  size_t size() const { return arrays_.size(); }

  const T* data(size_t i) const { return arrays_[i].data.data(); }
  T* data(size_t i) { return arrays_[i].data.data(); }

  size_t trainable_count() const {
    size_t n = 0;
    for (const auto& a : arrays_) {
      if (is_trainable(a.kind)) n += a.data.size();
    }
    return n;
  }

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out(config_);
    for (size_t i = 0; i < arrays_.size(); ++i) {
      std::transform(arrays_[i].data.begin(), arrays_[i].data.end(),
                     out[i].data.begin(), [](T x) { return static_cast<U>(x); });
    }
    return out;
  }

 private:
  NetworkConfig config_;
  NetworkLayout layout_;
  std::vector<ParamArray<T>> arrays_;
};

// Same shapes as Parameters; running-statistics slots stay zero.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

template <typename T>
Gradients<T> zero_gradients(const Parameters<T>& params) {
  Gradients<T> g(params.size());
  for (size_t i = 0; i < params.size(); ++i) g[i].assign(params[i].data.size(), T(0));
  return g;
}

// He-normal weights scaled by fan-in; norm scales 1, shifts 0, biases 0,
// running variance 1.
template <typename T>
Parameters<T> init_parameters(const NetworkConfig& config, Rng& rng) {
  Parameters<T> params(config);
  for (auto& a : params.arrays()) {
    switch (a.kind) {
      case ParamKind::kWeight: {
        int fan_in = 1;
        for (size_t d = 1; d < a.shape.size(); ++d) fan_in *= a.shape[d];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (T& x : a.data) x = static_cast<T>(dist(rng));
        break;
      }
      case ParamKind::kNormScale:
      case ParamKind::kRunningVar:
        std::fill(a.data.begin(), a.data.end(), T(1));
        break;
      default:
        break;
    }
  }
  return params;
}

struct NetworkOutput {
  std::vector<double> policy_logits;
  ValueVector value;
};

struct LossTerms {
  double value_mse = 0.0;
  double policy_ce = 0.0;
  double l2_penalty = 0.0;
  double total = 0.0;
};

// Dense policy target, score vector and the action mask the policy softmax
// is restricted to.
struct LossTarget {
  std::vector<double> pi;
  ScoreVector z;
  std::vector<bool> mask;
};

enum class NormMode { kInference, kTraining };

namespace nn {

inline constexpr double kLogClamp = 1e-10;

// NCHW activation buffer.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}
  size_t plane() const { return static_cast<size_t>(h) * w; }
  T* at(int ni, int ci) { return v.data() + (static_cast<size_t>(ni) * c + ci) * plane(); }
  const T* at(int ni, int ci) const {
    return v.data() + (static_cast<size_t>(ni) * c + ci) * plane();
  }
};

// Square kernel of size k (1 or 3) with zero padding k/2, stride 1.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const T* weight, int out_channels, int k) {
  Tensor<T> y(x.n, out_channels, x.h, x.w);
  const int pad = k / 2;
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_channels; ++co) {
      T* out = y.at(n, co);
      for (int ci = 0; ci < x.c; ++ci) {
        const T* in = x.at(n, ci);
        const T* wk = weight + (static_cast<size_t>(co) * x.c + ci) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int y0 = std::max(0, -dy), y1 = std::min(x.h, x.h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const int x0 = std::max(0, -dx), x1 = std::min(x.w, x.w - dx);
            const T wv = wk[ky * k + kx];
            for (int r = y0; r < y1; ++r) {
              T* o = out + r * x.w;
              const T* src = in + (r + dy) * x.w + dx;
              for (int c = x0; c < x1; ++c) o[c] += wv * src[c];
            }
          }
        }
      }
    }
  }
  return y;
}

// Accumulates into grad_w; returns dL/dx.
template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, const T* weight, const Tensor<T>& dy_t,
                        int k, T* grad_w) {
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  const int pad = k / 2;
  const int out_channels = dy_t.c;
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_channels; ++co) {
      const T* g = dy_t.at(n, co);
      for (int ci = 0; ci < x.c; ++ci) {
        const T* in = x.at(n, ci);
        T* din = dx.at(n, ci);
        const size_t wbase = (static_cast<size_t>(co) * x.c + ci) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int y0 = std::max(0, -dy), y1 = std::min(x.h, x.h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dxo = kx - pad;
            const int x0 = std::max(0, -dxo), x1 = std::min(x.w, x.w - dxo);
            const T wv = weight[wbase + ky * k + kx];
            T acc = 0;
            for (int r = y0; r < y1; ++r) {
              const T* gr = g + r * x.w;
              const T* src = in + (r + dy) * x.w + dxo;
              T* dst = din + (r + dy) * x.w + dxo;
              for (int c = x0; c < x1; ++c) {
                acc += gr[c] * src[c];
                dst[c] += wv * gr[c];
              }
            }
            grad_w[wbase + ky * k + kx] += acc;
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
struct NormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;
};

// Per-channel normalization. `first` indexes the scale array.
template <typename T>
Tensor<T> norm_forward(const Tensor<T>& x, const Parameters<T>& params, size_t first,
                       NormMode mode, NormCache<T>* cache) {
  const T* scale = params.data(first);
  const T* shift = params.data(first + 1);
  const T* rmean = params.data(first + 2);
  const T* rvar = params.data(first + 3);
  const T eps = static_cast<T>(params.config().norm_epsilon);
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const size_t P = x.plane();
  const double count = static_cast<double>(x.n) * P;
  if (cache) {
    cache->xhat = Tensor<T>(x.n, x.c, x.h, x.w);
    cache->inv_std.assign(x.c, T(0));
    cache->batch_mean.assign(x.c, T(0));
    cache->batch_var.assign(x.c, T(0));
  }
  for (int c = 0; c < x.c; ++c) {
    T mean, var;
    if (mode == NormMode::kTraining) {
      double s = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const T* p = x.at(n, c);
        for (size_t i = 0; i < P; ++i) s += p[i];
      }
      const double m = s / count;
      double ss = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const T* p = x.at(n, c);
        for (size_t i = 0; i < P; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(ss / count);
    } else {
      mean = rmean[c];
      var = rvar[c];
    }
    const T inv = T(1) / std::sqrt(var + eps);
    for (int n = 0; n < x.n; ++n) {
      const T* p = x.at(n, c);
      T* o = y.at(n, c);
      T* xh = cache ? cache->xhat.at(n, c) : nullptr;
      for (size_t i = 0; i < P; ++i) {
        const T h = (p[i] - mean) * inv;
        if (xh) xh[i] = h;
        o[i] = scale[c] * h + shift[c];
      }
    }
    if (cache) {
      cache->inv_std[c] = inv;
      cache->batch_mean[c] = mean;
      cache->batch_var[c] = var;
    }
  }
  return y;
}

template <typename T>
Tensor<T> norm_backward(const NormCache<T>& cache, const Parameters<T>& params,
                        size_t first, const Tensor<T>& dy, Gradients<T>& grads) {
  const T* scale = params.data(first);
  T* gscale = grads[first].data();
  T* gshift = grads[first + 1].data();
  Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
  const size_t P = dy.plane();
  const T M = static_cast<T>(static_cast<double>(dy.n) * P);
  for (int c = 0; c < dy.c; ++c) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (int n = 0; n < dy.n; ++n) {
      const T* g = dy.at(n, c);
      const T* xh = cache.xhat.at(n, c);
      for (size_t i = 0; i < P; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * xh[i];
      }
    }
    gscale[c] += sum_dy_xhat;
    gshift[c] += sum_dy;
    const T k = scale[c] * cache.inv_std[c] / M;
    for (int n = 0; n < dy.n; ++n) {
      const T* g = dy.at(n, c);
      const T* xh = cache.xhat.at(n, c);
      T* o = dx.at(n, c);
      for (size_t i = 0; i < P; ++i) {
        o[i] = k * (M * g[i] - sum_dy - xh[i] * sum_dy_xhat);
      }
    }
  }
  return dx;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (T& v : x.v) v = v > T(0) ? v : T(0);
}

// Zeroes gradient where the forward output was not positive.
template <typename T>
void relu_backward_inplace(const Tensor<T>& out, Tensor<T>& grad) {
  for (size_t i = 0; i < grad.v.size(); ++i) {
    if (!(out.v[i] > T(0))) grad.v[i] = T(0);
  }
}

// y[n, o] = W[o, :] . x[n, :] + b[o]
template <typename T>
std::vector<T> fc_forward(std::span<const T> x, int batch, int in, const T* w,
                          const T* b, int out) {
  std::vector<T> y(static_cast<size_t>(batch) * out);
  for (int n = 0; n < batch; ++n) {
    const T* xr = x.data() + static_cast<size_t>(n) * in;
    for (int o = 0; o < out; ++o) {
      const T* wr = w + static_cast<size_t>(o) * in;
      T acc = b[o];
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      y[static_cast<size_t>(n) * out + o] = acc;
    }
  }
  return y;
}

template <typename T>
std::vector<T> fc_backward(std::span<const T> x, int batch, int in, const T* w,
                           std::span<const T> dy, int out, T* gw, T* gb) {
  std::vector<T> dx(static_cast<size_t>(batch) * in, T(0));
  for (int n = 0; n < batch; ++n) {
    const T* xr = x.data() + static_cast<size_t>(n) * in;
    T* dxr = dx.data() + static_cast<size_t>(n) * in;
    for (int o = 0; o < out; ++o) {
      const T g = dy[static_cast<size_t>(n) * out + o];
      if (g == T(0)) continue;
      const T* wr = w + static_cast<size_t>(o) * in;
      T* gwr = gw + static_cast<size_t>(o) * in;
      gb[o] += g;
      for (int i = 0; i < in; ++i) {
        gwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  return dx;
}

template <typename T>
struct BlockCache {
  Tensor<T> input;
  std::vector<T> pooled;       // [N, C]
  std::vector<T> reduce_out;   // [N, R] after relu
  std::vector<T> gate;         // [N, C] sigmoid output
  Tensor<T> gated;
  NormCache<T> norm1;
  Tensor<T> act1;              // relu(norm1(gated))
  Tensor<T> conv1_out;
  NormCache<T> norm2;
  Tensor<T> act2;              // relu(norm2(conv1_out))
};

template <typename T>
struct HeadCache {
  Tensor<T> conv_out;
  NormCache<T> norm;
  Tensor<T> act;
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  NormCache<T> stem_norm;
  Tensor<T> stem_conv_out;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> trunk;
  HeadCache<T> policy;
  HeadCache<T> value;
  std::vector<T> value_hidden;  // [N, H] after relu
  std::vector<T> value_out;     // [N, n] after tanh
  std::vector<T> logits;        // [N, P]
};

template <typename T>
Tensor<T> to_nchw(std::span<const StateTensor> batch, const NetworkConfig& cfg) {
  Tensor<T> x(static_cast<int>(batch.size()), cfg.input_planes, cfg.board_rows,
              cfg.board_cols);
  for (size_t n = 0; n < batch.size(); ++n) {
    const StateTensor& s = batch[n];
    if (s.rows != cfg.board_rows || s.cols != cfg.board_cols ||
        s.planes != cfg.input_planes ||
        s.data.size() != static_cast<size_t>(s.rows) * s.cols * s.planes) {
      throw std::invalid_argument("state tensor shape does not match network");
    }
    for (int p = 0; p < s.planes; ++p) {
      T* dst = x.at(static_cast<int>(n), p);
      for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c) dst[r * s.cols + c] = static_cast<T>(s.at(r, c, p));
      }
    }
  }
  return x;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
std::vector<NetworkOutput> forward_impl(const Parameters<T>& params,
                                        std::span<const StateTensor> batch,
                                        NormMode mode, ForwardCache<T>* cache) {
  const NetworkConfig& cfg = params.config();
  const NetworkLayout& L = params.layout();
  const int N = static_cast<int>(batch.size());
  const int C = cfg.channels;
  const int R = cfg.se_hidden();
  const int HW = cfg.cells();

  Tensor<T> x = to_nchw<T>(batch, cfg);
  if (cache) cache->input = x;
  Tensor<T> h = conv_forward(x, params.data(L.stem_conv), C, 3);
  if (cache) cache->stem_conv_out = h;
  h = norm_forward(h, params, L.stem_norm, mode, cache ? &cache->stem_norm : nullptr);
  relu_inplace(h);

  if (cache) cache->blocks.assign(L.blocks.size(), BlockCache<T>{});
  for (size_t b = 0; b < L.blocks.size(); ++b) {
    const auto& blk = L.blocks[b];
    BlockCache<T>* bc = cache ? &cache->blocks[b] : nullptr;
    if (bc) bc->input = h;
    std::vector<T> pooled(static_cast<size_t>(N) * C);
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const T* p = h.at(n, c);
        T s = 0;
        for (int i = 0; i < HW; ++i) s += p[i];
        pooled[static_cast<size_t>(n) * C + c] = s / static_cast<T>(HW);
      }
    }
    std::vector<T> red = fc_forward<T>(pooled, N, C, params.data(blk.se_reduce_w),
                                       params.data(blk.se_reduce_b), R);
    for (T& v : red) v = v > T(0) ? v : T(0);
    std::vector<T> gate = fc_forward<T>(red, N, R, params.data(blk.se_expand_w),
                                        params.data(blk.se_expand_b), C);
    for (T& v : gate) v = sigmoid(v);
    Tensor<T> gated = h;
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        T* p = gated.at(n, c);
        const T g = gate[static_cast<size_t>(n) * C + c];
        for (int i = 0; i < HW; ++i) p[i] *= g;
      }
    }
    Tensor<T> a1 = norm_forward(gated, params, blk.norm1, mode, bc ? &bc->norm1 : nullptr);
    relu_inplace(a1);
    Tensor<T> c1 = conv_forward(a1, params.data(blk.conv1), C, 3);
    Tensor<T> a2 = norm_forward(c1, params, blk.norm2, mode, bc ? &bc->norm2 : nullptr);
    relu_inplace(a2);
    Tensor<T> c2 = conv_forward(a2, params.data(blk.conv2), C, 3);
    for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += c2.v[i];
    if (bc) {
      bc->pooled = std::move(pooled);
      bc->reduce_out = std::move(red);
      bc->gate = std::move(gate);
      bc->gated = std::move(gated);
      bc->act1 = std::move(a1);
      bc->conv1_out = std::move(c1);
      bc->act2 = std::move(a2);
    }
  }
  if (cache) cache->trunk = h;

  const int PP = NetworkConfig::kPolicyPlanes;
  Tensor<T> pc = conv_forward(h, params.data(L.policy_conv), PP, 1);
  if (cache) cache->policy.conv_out = pc;
  Tensor<T> pa = norm_forward(pc, params, L.policy_norm, mode,
                              cache ? &cache->policy.norm : nullptr);
  relu_inplace(pa);
  std::vector<T> logits = fc_forward<T>(pa.v, N, PP * HW, params.data(L.policy_fc_w),
                                        params.data(L.policy_fc_b), cfg.policy_size);

  const int VP = NetworkConfig::kValuePlanes;
  Tensor<T> vc = conv_forward(h, params.data(L.value_conv), VP, 1);
  if (cache) cache->value.conv_out = vc;
  Tensor<T> va = norm_forward(vc, params, L.value_norm, mode,
                              cache ? &cache->value.norm : nullptr);
  relu_inplace(va);
  std::vector<T> hidden = fc_forward<T>(va.v, N, VP * HW, params.data(L.value_fc1_w),
                                        params.data(L.value_fc1_b), cfg.value_hidden);
  for (T& v : hidden) v = v > T(0) ? v : T(0);
  std::vector<T> value = fc_forward<T>(hidden, N, cfg.value_hidden,
                                       params.data(L.value_fc2_w),
                                       params.data(L.value_fc2_b), cfg.value_size);
  for (T& v : value) v = std::tanh(v);

  std::vector<NetworkOutput> out(N);
  for (int n = 0; n < N; ++n) {
    out[n].policy_logits.assign(logits.begin() + static_cast<size_t>(n) * cfg.policy_size,
                                logits.begin() + static_cast<size_t>(n + 1) * cfg.policy_size);
    out[n].value.assign(value.begin() + static_cast<size_t>(n) * cfg.value_size,
                        value.begin() + static_cast<size_t>(n + 1) * cfg.value_size);
  }
  if (cache) {
    cache->policy.act = std::move(pa);
    cache->value.act = std::move(va);
    cache->value_hidden = std::move(hidden);
    cache->value_out = std::move(value);
    cache->logits = std::move(logits);
  }
  return out;
}

}  // namespace nn

template <typename T>
std::vector<NetworkOutput> forward(const Parameters<T>& params,
                                   std::span<const StateTensor> batch,
                                   NormMode mode = NormMode::kInference) {
  return nn::forward_impl<T>(params, batch, mode, nullptr);
}

template <typename T>
double l2_penalty(const Parameters<T>& params, double l2) {
  double s = 0.0;
  for (const auto& a : params.arrays()) {
    if (a.kind != ParamKind::kWeight) continue;
    for (T x : a.data) s += static_cast<double>(x) * x;
  }
  return l2 * s;
}

// Per-sample value MSE (averaged over players) and masked cross-entropy.
// l2 is added once by the caller.
inline LossTerms sample_loss(const NetworkOutput& out, const LossTarget& target) {
  LossTerms t;
  const size_t n = target.z.size();
  for (size_t i = 0; i < n; ++i) {
    const double d = target.z[i] - out.value[i];
    t.value_mse += d * d;
  }
  t.value_mse /= static_cast<double>(n);
  const std::vector<double> p = masked_softmax(out.policy_logits, target.mask);
  for (size_t a = 0; a < p.size(); ++a) {
    if (target.pi[a] > 0.0) {
      t.policy_ce -= target.pi[a] * std::log(std::max(p[a], nn::kLogClamp));
    }
  }
  t.total = t.value_mse + t.policy_ce;
  return t;
}

// Loss of one prediction against (pi, z), with the softmax restricted to the
// moves listed in pi.
template <typename T>
LossTerms loss(const NetworkOutput& out, const MoveDistribution& target_pi,
               const ScoreVector& target_z, const Parameters<T>& params, double l2) {
  const int actions = static_cast<int>(out.policy_logits.size());
  LossTarget target{target_pi.dense(actions), target_z, std::vector<bool>(actions, false)};
  for (const auto& e : target_pi.entries()) target.mask[e.move.index] = true;
  LossTerms t = sample_loss(out, target);
  t.l2_penalty = l2_penalty(params, l2);
  t.total += t.l2_penalty;
  return t;
}

template <typename T>
struct GradientResult {
  LossTerms loss;
  Gradients<T> grads;
  // Batch statistics per norm layer (scale index -> mean, var), used to
  // update running averages after a training step.
  std::vector<std::pair<size_t, std::pair<std::vector<T>, std::vector<T>>>> norm_stats;
};

// Training-mode forward pass plus exact gradients of the batch-mean loss
// (value MSE + policy CE) + l2 * sum of squared weights.
template <typename T>
GradientResult<T> compute_gradients(const Parameters<T>& params,
                                    std::span<const StateTensor> batch,
                                    std::span<const LossTarget> targets, double l2) {
  using nn::Tensor;
  if (batch.size() != targets.size() || batch.empty()) {
    throw std::invalid_argument("compute_gradients: batch/targets mismatch");
  }
  const NetworkConfig& cfg = params.config();
  const NetworkLayout& L = params.layout();
  const int N = static_cast<int>(batch.size());
  const int C = cfg.channels;
  const int R = cfg.se_hidden();
  const int HW = cfg.cells();
  const int PP = NetworkConfig::kPolicyPlanes;
  const int VP = NetworkConfig::kValuePlanes;

  nn::ForwardCache<T> cache;
  std::vector<NetworkOutput> outs =
      nn::forward_impl<T>(params, batch, NormMode::kTraining, &cache);

  GradientResult<T> result;
  result.grads = zero_gradients(params);
  Gradients<T>& G = result.grads;
  const double inv_n = 1.0 / N;

  // Output-layer gradients.
  std::vector<T> dlogits(static_cast<size_t>(N) * cfg.policy_size, T(0));
  std::vector<T> dvalue_pre(static_cast<size_t>(N) * cfg.value_size, T(0));
  for (int n = 0; n < N; ++n) {
    const LossTarget& tg = targets[n];
    if (static_cast<int>(tg.z.size()) != cfg.value_size ||
        static_cast<int>(tg.pi.size()) != cfg.policy_size ||
        static_cast<int>(tg.mask.size()) != cfg.policy_size) {
      throw std::invalid_argument("compute_gradients: target shape mismatch");
    }
    const LossTerms lt = sample_loss(outs[n], tg);
    result.loss.value_mse += lt.value_mse * inv_n;
    result.loss.policy_ce += lt.policy_ce * inv_n;
    const std::vector<double> p = masked_softmax(outs[n].policy_logits, tg.mask);
    for (int a = 0; a < cfg.policy_size; ++a) {
      if (tg.mask[a]) {
        dlogits[static_cast<size_t>(n) * cfg.policy_size + a] =
            static_cast<T>((p[a] - tg.pi[a]) * inv_n);
      }
    }
    for (int i = 0; i < cfg.value_size; ++i) {
      const double v = outs[n].value[i];
      const double dv = 2.0 * (v - tg.z[i]) / cfg.value_size;
      dvalue_pre[static_cast<size_t>(n) * cfg.value_size + i] =
          static_cast<T>(dv * (1.0 - v * v) * inv_n);
    }
  }
  result.loss.l2_penalty = l2_penalty(params, l2);
  result.loss.total = result.loss.value_mse + result.loss.policy_ce + result.loss.l2_penalty;

  // Value head.
  std::vector<T> dhidden = nn::fc_backward<T>(
      cache.value_hidden, N, cfg.value_hidden, params.data(L.value_fc2_w), dvalue_pre,
      cfg.value_size, G[L.value_fc2_w].data(), G[L.value_fc2_b].data());
  for (size_t i = 0; i < dhidden.size(); ++i) {
    if (!(cache.value_hidden[i] > T(0))) dhidden[i] = T(0);
  }
  Tensor<T> dva(N, VP, cfg.board_rows, cfg.board_cols);
  dva.v = nn::fc_backward<T>(cache.value.act.v, N, VP * HW, params.data(L.value_fc1_w),
                             dhidden, cfg.value_hidden, G[L.value_fc1_w].data(),
                             G[L.value_fc1_b].data());
  nn::relu_backward_inplace(cache.value.act, dva);
  Tensor<T> dvc = nn::norm_backward(cache.value.norm, params, L.value_norm, dva, G);
  Tensor<T> dtrunk =
      nn::conv_backward(cache.trunk, params.data(L.value_conv), dvc, 1, G[L.value_conv].data());

  // Policy head.
  Tensor<T> dpa(N, PP, cfg.board_rows, cfg.board_cols);
  dpa.v = nn::fc_backward<T>(cache.policy.act.v, N, PP * HW, params.data(L.policy_fc_w),
                             dlogits, cfg.policy_size, G[L.policy_fc_w].data(),
                             G[L.policy_fc_b].data());
  nn::relu_backward_inplace(cache.policy.act, dpa);
  Tensor<T> dpc = nn::norm_backward(cache.policy.norm, params, L.policy_norm, dpa, G);
  Tensor<T> dtp = nn::conv_backward(cache.trunk, params.data(L.policy_conv), dpc, 1,
                                    G[L.policy_conv].data());
  for (size_t i = 0; i < dtrunk.v.size(); ++i) dtrunk.v[i] += dtp.v[i];

  // Residual blocks, last to first.
  Tensor<T> dh = std::move(dtrunk);
  for (size_t bi = L.blocks.size(); bi-- > 0;) {
    const auto& blk = L.blocks[bi];
    const nn::BlockCache<T>& bc = cache.blocks[bi];
    // y = x + conv2(act2): dx starts as dy.
    Tensor<T> da2 = nn::conv_backward(bc.act2, params.data(blk.conv2), dh, 3,
                                      G[blk.conv2].data());
    nn::relu_backward_inplace(bc.act2, da2);
    Tensor<T> dc1 = nn::norm_backward(bc.norm2, params, blk.norm2, da2, G);
    Tensor<T> da1 = nn::conv_backward(bc.act1, params.data(blk.conv1), dc1, 3,
                                      G[blk.conv1].data());
    nn::relu_backward_inplace(bc.act1, da1);
    Tensor<T> dgated = nn::norm_backward(bc.norm1, params, blk.norm1, da1, G);
    // gated = x * gate
    std::vector<T> dgate(static_cast<size_t>(N) * C, T(0));
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const size_t nc = static_cast<size_t>(n) * C + c;
        const T g = bc.gate[nc];
        const T* xin = bc.input.at(n, c);
        T* dg = dgated.at(n, c);
        T* dxo = dh.at(n, c);
        T acc = 0;
        for (int i = 0; i < HW; ++i) {
          acc += dg[i] * xin[i];
          dxo[i] += dg[i] * g;
        }
        // Through the sigmoid.
        dgate[nc] = acc * g * (T(1) - g);
      }
    }
    std::vector<T> dred = nn::fc_backward<T>(bc.reduce_out, N, R, params.data(blk.se_expand_w),
                                             dgate, C, G[blk.se_expand_w].data(),
                                             G[blk.se_expand_b].data());
    for (size_t i = 0; i < dred.size(); ++i) {
      if (!(bc.reduce_out[i] > T(0))) dred[i] = T(0);
    }
    std::vector<T> dpooled = nn::fc_backward<T>(bc.pooled, N, C, params.data(blk.se_reduce_w),
                                                dred, R, G[blk.se_reduce_w].data(),
                                                G[blk.se_reduce_b].data());
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const T d = dpooled[static_cast<size_t>(n) * C + c] / static_cast<T>(HW);
        T* dxo = dh.at(n, c);
        for (int i = 0; i < HW; ++i) dxo[i] += d;
      }
    }
  }

  // Stem. dh is the gradient at relu(norm(conv(x))).
  {
    const Tensor<T>& stem_out = cache.blocks.empty() ? cache.trunk : cache.blocks.front().input;
    nn::relu_backward_inplace(stem_out, dh);
    Tensor<T> dconv = nn::norm_backward(cache.stem_norm, params, L.stem_norm, dh, G);
    nn::conv_backward(cache.input, params.data(L.stem_conv), dconv, 3, G[L.stem_conv].data());
  }

  if (l2 != 0.0) {
    for (size_t i = 0; i < params.size(); ++i) {
      if (params[i].kind != ParamKind::kWeight) continue;
      const T k = static_cast<T>(2.0 * l2);
      for (size_t j = 0; j < G[i].size(); ++j) G[i][j] += k * params[i].data[j];
    }
  }

  auto push_stats = [&](size_t first, const nn::NormCache<T>& nc) {
    result.norm_stats.push_back({first, {nc.batch_mean, nc.batch_var}});
  };
  push_stats(L.stem_norm, cache.stem_norm);
  for (size_t b = 0; b < L.blocks.size(); ++b) {
    push_stats(L.blocks[b].norm1, cache.blocks[b].norm1);
    push_stats(L.blocks[b].norm2, cache.blocks[b].norm2);
  }
  push_stats(L.policy_norm, cache.policy.norm);
  push_stats(L.value_norm, cache.value.norm);
  return result;
}

// running = momentum * running + (1 - momentum) * batch
template <typename T>
void update_running_stats(Parameters<T>& params, const GradientResult<T>& r) {
  const T m = static_cast<T>(params.config().norm_momentum);
  for (const auto& [first, stats] : r.norm_stats) {
    T* rmean = params.data(first + 2);
    T* rvar = params.data(first + 3);
    for (size_t c = 0; c < stats.first.size(); ++c) {
      rmean[c] = m * rmean[c] + (T(1) - m) * stats.first[c];
      rvar[c] = m * rvar[c] + (T(1) - m) * stats.second[c];
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: <prefix>.json manifest + <prefix>.bin little-endian f32 blob.

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

inline std::string blob_path_for(const std::string& manifest_path) {
  const std::string suffix = ".json";
  if (manifest_path.size() > suffix.size() &&
      manifest_path.compare(manifest_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return manifest_path.substr(0, manifest_path.size() - suffix.size()) + ".bin";
  }
  return manifest_path + ".bin";
}

inline std::string basename_of(const std::string& path) {
  const auto pos = path.find_last_of('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

inline void write_array_bundle(const std::string& manifest_path,
                               const std::vector<NamedArray>& arrays,
                               nlohmann::json header) {
  const std::string blob_path = blob_path_for(manifest_path);
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path);
  nlohmann::json list = nlohmann::json::array();
  uint64_t offset = 0;
  for (const NamedArray& a : arrays) {
    list.push_back({{"name", a.name}, {"shape", a.shape}, {"dtype", "f32"}, {"offset", offset}});
    for (float f : a.data) {
      uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      const unsigned char bytes[4] = {
          static_cast<unsigned char>(bits & 0xFF), static_cast<unsigned char>((bits >> 8) & 0xFF),
          static_cast<unsigned char>((bits >> 16) & 0xFF),
          static_cast<unsigned char>((bits >> 24) & 0xFF)};
      blob.write(reinterpret_cast<const char*>(bytes), 4);
    }
    offset += 4 * a.data.size();
  }
  if (!blob) throw std::runtime_error("write failed: " + blob_path);
  header["arrays"] = std::move(list);
  header["blob"] = basename_of(blob_path);
  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write " + manifest_path);
  manifest << header.dump(2) << "\n";
}

struct ArrayBundle {
  nlohmann::json header;
  std::vector<NamedArray> arrays;
};

inline ArrayBundle read_array_bundle(const std::string& manifest_path) {
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot open checkpoint " + manifest_path);
  ArrayBundle bundle;
  bundle.header = nlohmann::json::parse(manifest);
  const std::string blob_path = blob_path_for(manifest_path);
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + blob_path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)),
                                   std::istreambuf_iterator<char>());
  for (const auto& entry : bundle.header.at("arrays")) {
    if (entry.at("dtype") != "f32") throw std::runtime_error("unsupported dtype");
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<int>>();
    size_t count = 1;
    for (int d : a.shape) count *= static_cast<size_t>(d);
    const uint64_t offset = entry.at("offset").get<uint64_t>();
    if (offset + 4 * count > bytes.size()) throw std::runtime_error("truncated blob");
    a.data.resize(count);
    for (size_t i = 0; i < count; ++i) {
      const unsigned char* b = bytes.data() + offset + 4 * i;
      const uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                            (static_cast<uint32_t>(b[2]) << 16) |
                            (static_cast<uint32_t>(b[3]) << 24);
      std::memcpy(&a.data[i], &bits, sizeof bits);
    }
    bundle.arrays.push_back(std::move(a));
  }
  return bundle;
}

template <typename T>
void save_checkpoint(const Parameters<T>& params, const std::string& manifest_path,
                     nlohmann::json extra = nlohmann::json::object()) {
  std::vector<NamedArray> arrays;
  for (const auto& a : params.arrays()) {
    arrays.push_back({a.name, a.shape, std::vector<float>(a.data.begin(), a.data.end())});
  }
  nlohmann::json header = {{"format", "mpaz-checkpoint-1"},
                           {"config", params.config()},
                           {"extra", std::move(extra)}};
  write_array_bundle(manifest_path, arrays, std::move(header));
}

template <typename T>
Parameters<T> load_checkpoint(const std::string& manifest_path,
                              nlohmann::json* extra = nullptr) {
  ArrayBundle bundle = read_array_bundle(manifest_path);
  Parameters<T> params(bundle.header.at("config").get<NetworkConfig>());
  if (bundle.arrays.size() != params.size()) {
    throw std::runtime_error("checkpoint array count mismatch");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (bundle.arrays[i].name != params[i].name || bundle.arrays[i].shape != params[i].shape) {
      throw std::runtime_error("checkpoint layout mismatch at " + bundle.arrays[i].name);
    }
    std::transform(bundle.arrays[i].data.begin(), bundle.arrays[i].data.end(),
                   params[i].data.begin(), [](float f) { return static_cast<T>(f); });
  }
  if (extra) *extra = bundle.header.value("extra", nlohmann::json::object());
  return params;
}

// Inference-mode network behind the search Evaluator interface.
template <typename T>
class NetworkEvaluator final : public Evaluator {
 public:
  explicit NetworkEvaluator(std::shared_ptr<const Parameters<T>> params)
      : params_(std::move(params)) {}

  EvaluatorOutput evaluate(const StateTensor& tensor) const override {
    std::vector<NetworkOutput> out =
        forward(*params_, std::span<const StateTensor>(&tensor, 1), NormMode::kInference);
    return {std::move(out[0].policy_logits), std::move(out[0].value)};
  }

  const Parameters<T>& params() const { return *params_; }

 private:
  std::shared_ptr<const Parameters<T>> params_;
};

}  // namespace mpaz

#endif  // MPAZ_NETWORK_HPP_
