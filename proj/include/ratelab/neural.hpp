// Copyright 2026 The ratelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fully connected rectifier networks with hand-written backpropagation, the
// Adam optimizer and the loss helpers shared by both agents.
//
// Batches are column-major: an input batch is an (input_width x batch)
// matrix and every layer computes relu(W * A + b) except the last, which is
// affine unless `relu_output` is set. All arithmetic is double precision.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ratelab/common.hpp"

namespace ratelab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Parameters, gradients and optimizer moments share this layout.
struct ParamSet {
  std::vector<DenseLayer> layers;

  ParamSet ZerosLike() const {
    ParamSet z;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
      z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    return z;
  }

  bool SameShape(const ParamSet& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
          layers[i].weight.cols() != other.layers[i].weight.cols() ||
          layers[i].bias.size() != other.layers[i].bias.size()) {
        return false;
      }
    }
    return true;
  }

  double SquaredNorm() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
    return s;
  }

  bool AllFinite() const {
    for (const auto& l : layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  std::size_t Count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  void Scale(double factor) {
    for (auto& l : layers) {
      l.weight *= factor;
      l.bias *= factor;
    }
  }

  void Add(const ParamSet& other) {
    Expects(SameShape(other), "ParamSet::Add: shape mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.SameShape(b)) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
    }
    return true;
  }
};

/// Rescales gradients in place so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
inline double ClipGradNorm(ParamSet& grads, double max_norm) {
  const double norm = std::sqrt(grads.SquaredNorm());
  if (norm > max_norm && norm > 0.0) grads.Scale(max_norm / norm);
  return norm;
}

/// Activations kept from a forward pass; Backward needs them.
struct ForwardCache {
  std::vector<Matrix> activations;  // [input, layer 1 output, ..., layer L output]
  bool empty() const { return activations.empty(); }
};

struct BackwardResult {
  ParamSet grads;
  Matrix input_grad;
};

namespace detail {

inline Matrix ForwardStack(std::span<const DenseLayer> layers, const Matrix& x, bool relu_last,
                           ForwardCache* cache) {
  Expects(!layers.empty(), "forward: network has no layers");
  Expects(x.rows() == layers.front().weight.cols(), "forward: input width mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(layers.size() + 1);
    cache->activations.push_back(x);
  }
  Matrix a = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = layers[i].weight * a;
    z.colwise() += layers[i].bias;
    if (i + 1 < layers.size() || relu_last) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

inline BackwardResult BackwardStack(std::span<const DenseLayer> layers, const ForwardCache& cache,
                                    const Matrix& upstream, bool relu_last) {
  if (cache.activations.size() != layers.size() + 1) {
    throw ContractViolation("backward: no matching forward cache");
  }
  const Matrix& out = cache.activations.back();
  Expects(upstream.rows() == out.rows() && upstream.cols() == out.cols(), "backward: upstream gradient shape");
  BackwardResult res;
  res.grads.layers.resize(layers.size());
  Matrix delta = upstream;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Matrix& a_out = cache.activations[k + 1];
    if (k + 1 < layers.size() || relu_last) delta = delta.cwiseProduct((a_out.array() > 0.0).cast<double>().matrix());
    const Matrix& a_in = cache.activations[k];
    res.grads.layers[k].weight.noalias() = delta * a_in.transpose();
    res.grads.layers[k].bias = delta.rowwise().sum();
    Matrix prev = layers[k].weight.transpose() * delta;
    delta = std::move(prev);
  }
  res.input_grad = std::move(delta);
  return res;
}

inline ParamSet HeInitLayers(const std::vector<int>& sizes, Rng& rng) {
  Expects(sizes.size() >= 2, "Mlp: need at least input and output widths");
  ParamSet p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    Expects(sizes[i] > 0 && sizes[i + 1] > 0, "Mlp: layer widths must be positive");
    const double sd = std::sqrt(2.0 / sizes[i]);
    std::normal_distribution<double> dist(0.0, sd);
    DenseLayer layer{Matrix(sizes[i + 1], sizes[i]), Vector::Zero(sizes[i + 1])};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

}  // namespace detail

/// Multi-layer perceptron: rectifier hidden layers, affine output (or a
/// rectified output when used as a feature trunk).
class Mlp {
 public:
  Mlp() = default;

  /// All-zero parameters.
  explicit Mlp(std::vector<int> sizes, bool relu_output = false) : sizes_(std::move(sizes)), relu_output_(relu_output) {
    Expects(sizes_.size() >= 2, "Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
      Expects(sizes_[i] > 0 && sizes_[i + 1] > 0, "Mlp: layer widths must be positive");
      params_.layers.push_back({Matrix::Zero(sizes_[i + 1], sizes_[i]), Vector::Zero(sizes_[i + 1])});
    }
  }

  /// He-scaled normal weights, zero biases.
  static Mlp HeInit(std::vector<int> sizes, Rng& rng, bool relu_output = false) {
    Mlp net;
    net.params_ = detail::HeInitLayers(sizes, rng);
    net.sizes_ = std::move(sizes);
    net.relu_output_ = relu_output;
    return net;
  }

  static Mlp FromParams(std::vector<int> sizes, ParamSet params, bool relu_output = false) {
    Mlp net(sizes, relu_output);
    Expects(net.params_.SameShape(params), "Mlp::FromParams: parameter shapes do not match sizes");
    net.params_ = std::move(params);
    return net;
  }

  Matrix Forward(const Matrix& x, ForwardCache* cache = nullptr) const {
    return detail::ForwardStack(params_.layers, x, relu_output_, cache);
  }

  Vector Forward(const Vector& x) const {
    Matrix in = x;
    return detail::ForwardStack(params_.layers, in, relu_output_, nullptr).col(0);
  }

  BackwardResult Backward(const ForwardCache& cache, const Matrix& upstream) const {
    return detail::BackwardStack(params_.layers, cache, upstream, relu_output_);
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_width() const { return sizes_.front(); }
  int output_width() const { return sizes_.back(); }
  bool relu_output() const { return relu_output_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Multiply-accumulate count of one single-input forward pass.
  std::size_t MacCount() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) n += static_cast<std::size_t>(sizes_[i]) * sizes_[i + 1];
    return n;
  }

 private:
  std::vector<int> sizes_;
  bool relu_output_ = false;
  ParamSet params_;
};

/// Shared rectifier trunk feeding an actor head (action logits) and a critic
/// head (state value). Parameters live in one ParamSet laid out as
/// [trunk layers..., actor, critic] so the optimizer treats them as a unit.
class ActorCriticNet {
 public:
  struct Output {
    Matrix logits;  // actions x batch
    Matrix values;  // 1 x batch
  };
  struct Cache {
    ForwardCache trunk, actor, critic;
  };

  ActorCriticNet() = default;

  static ActorCriticNet HeInit(const std::vector<int>& trunk_sizes, int num_actions, Rng& rng) {
    Expects(trunk_sizes.size() >= 2, "ActorCriticNet: trunk needs at least two widths");
    ActorCriticNet net;
    net.trunk_sizes_ = trunk_sizes;
    net.num_actions_ = num_actions;
    net.params_ = detail::HeInitLayers(trunk_sizes, rng);
    const int feat = trunk_sizes.back();
    auto actor = detail::HeInitLayers({feat, num_actions}, rng);
    auto critic = detail::HeInitLayers({feat, 1}, rng);
    net.params_.layers.push_back(std::move(actor.layers[0]));
    net.params_.layers.push_back(std::move(critic.layers[0]));
    return net;
  }

  static ActorCriticNet FromParams(std::vector<int> trunk_sizes, int num_actions, ParamSet params) {
    Rng scratch(0);
    ActorCriticNet net = HeInit(trunk_sizes, num_actions, scratch);
    Expects(net.params_.SameShape(params), "ActorCriticNet::FromParams: parameter shapes do not match");
    net.params_ = std::move(params);
    return net;
  }

  Output Forward(const Matrix& x, Cache* cache = nullptr) const {
    Matrix feat = detail::ForwardStack(Trunk(), x, true, cache ? &cache->trunk : nullptr);
    Output out;
    out.logits = detail::ForwardStack(Head(0), feat, false, cache ? &cache->actor : nullptr);
    out.values = detail::ForwardStack(Head(1), feat, false, cache ? &cache->critic : nullptr);
    return out;
  }

  /// Gradients for upstream gradients on logits and values.
  ParamSet Backward(const Cache& cache, const Matrix& logit_grad, const Matrix& value_grad) const {
    BackwardResult actor = detail::BackwardStack(Head(0), cache.actor, logit_grad, false);
    BackwardResult critic = detail::BackwardStack(Head(1), cache.critic, value_grad, false);
    Matrix feat_grad = actor.input_grad + critic.input_grad;
    BackwardResult trunk = detail::BackwardStack(Trunk(), cache.trunk, feat_grad, true);
    ParamSet grads = std::move(trunk.grads);
    grads.layers.push_back(std::move(actor.grads.layers[0]));
    grads.layers.push_back(std::move(critic.grads.layers[0]));
    return grads;
  }

  const std::vector<int>& trunk_sizes() const { return trunk_sizes_; }
  int num_actions() const { return num_actions_; }
  int input_width() const { return trunk_sizes_.front(); }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  std::span<const DenseLayer> Trunk() const {
    return std::span<const DenseLayer>(params_.layers.data(), params_.layers.size() - 2);
  }
  std::span<const DenseLayer> Head(std::size_t which) const {
    return std::span<const DenseLayer>(params_.layers.data() + params_.layers.size() - 2 + which, 1);
  }

  std::vector<int> trunk_sizes_;
  int num_actions_ = 0;
  ParamSet params_;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState For(const ParamSet& params) {
    AdamState s;
    s.m = params.ZerosLike();
    s.v = params.ZerosLike();
    return s;
  }
};

/// One bias-corrected Adam update.
inline void AdamStep(ParamSet& params, const ParamSet& grads, AdamState& state, double lr) {
  Expects(params.SameShape(grads) && params.SameShape(state.m) && params.SameShape(state.v),
          "AdamStep: shape mismatch");
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double step_size = lr / c1;
  const double eps = state.epsilon;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= step_size * m.array() / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight, state.v.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias);
  }
}

inline double Huber(double delta, double kappa = 1.0) {
  const double a = std::abs(delta);
  return a <= kappa ? 0.5 * delta * delta : kappa * (a - 0.5 * kappa);
}

/// d Huber / d delta.
inline double HuberGrad(double delta, double kappa = 1.0) { return std::clamp(delta, -kappa, kappa); }

/// Numerically stable softmax.
inline Vector Softmax(const Vector& logits) {
  Expects(logits.size() > 0, "Softmax: empty logits");
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Shannon entropy in nats, with 0 log 0 = 0.
inline double Entropy(const Vector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

/// Index of the largest entry; ties go to the lowest index.
inline int Argmax(const Vector& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace ratelab
