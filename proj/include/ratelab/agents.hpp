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

// Value-based and actor-critic learners and the fusion that combines them.
//
// The DQN side keeps a main and a target Q-network, a uniform replay buffer
// and an epsilon-greedy behaviour policy. The actor-critic side keeps one
// global network behind a mutex; workers copy it, act for up to n steps,
// compute gradients locally and apply them as a single optimizer step.
// During training a fusion weight alpha picks the DQN candidate with
// probability alpha and the actor-critic candidate otherwise.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelab/common.hpp"
#include "ratelab/core_types.hpp"
#include "ratelab/environment.hpp"
#include "ratelab/neural.hpp"

namespace ratelab {

struct Transition {
  Vector state;
  int action = 0;
  double reward = 0.0;
  Vector next_state;
  bool done = false;
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
    Expects(capacity > 0, "ReplayBuffer: capacity must be positive");
  }

  void Add(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    ++total_added_;
  }

  /// `batch` distinct slots drawn uniformly.
  std::vector<std::size_t> SampleIndices(std::size_t batch, Rng& rng) const {
    Expects(batch <= storage_.size(), "ReplayBuffer::SampleIndices: batch larger than buffer");
    std::vector<std::size_t> picked;
    picked.reserve(batch);
    while (picked.size() < batch) {
      const auto i = static_cast<std::size_t>(UniformIndex(rng, storage_.size()));
      if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
    }
    return picked;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return total_added_; }
  const Transition& operator[](std::size_t slot) const { return storage_[slot]; }
  /// Most recently added transition.
  const Transition& back() const { return storage_[(next_ + capacity_ - 1) % capacity_]; }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t next_ = 0;
  std::uint64_t total_added_ = 0;
};

struct DqnConfig {
  double lr = 1e-4;
  int batch = 64;
  std::int64_t target_sync_every = 1000;
  double eps_start = 1.0;
  double eps_min = 0.05;
  std::int64_t decay_steps = 50000;
  double gamma = 0.99;
  std::vector<int> hidden = {128, 256, 128};
  std::size_t replay_capacity = 100000;
  double huber_kappa = 1.0;
  double grad_clip = 10.0;
  double value_init = 0.0;  // starting bias of every Q output

  void Validate() const {
    Expects(lr > 0.0, "DqnConfig: lr must be positive");
    Expects(batch >= 1, "DqnConfig: batch must be >= 1");
    Expects(target_sync_every >= 1, "DqnConfig: target_sync_every must be >= 1");
    Expects(eps_min > 0.0 && eps_min <= eps_start && eps_start <= 1.0, "DqnConfig: need 0 < eps_min <= eps_start <= 1");
    Expects(decay_steps >= 1, "DqnConfig: decay_steps must be >= 1");
    Expects(gamma > 0.0 && gamma < 1.0, "DqnConfig: gamma must lie in (0,1)");
    Expects(replay_capacity >= static_cast<std::size_t>(batch), "DqnConfig: replay capacity below batch size");
  }
};

/// Linearly decaying exploration rate.
inline double Epsilon(std::int64_t t, const DqnConfig& cfg) {
  const double frac = static_cast<double>(t) / static_cast<double>(cfg.decay_steps);
  return std::max(cfg.eps_min, cfg.eps_start - frac * (cfg.eps_start - cfg.eps_min));
}

/// Epsilon-greedy over the Q-values of `state`; greedy ties go to the lowest
/// index.
inline int SelectDqn(const Mlp& qnet, const Vector& state, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && Uniform01(rng) < epsilon) {
    return static_cast<int>(UniformIndex(rng, static_cast<std::uint64_t>(qnet.output_width())));
  }
  return Argmax(qnet.Forward(state));
}

inline double TdTarget(double reward, const Vector& next_state, bool done, const Mlp& target_net, double gamma) {
  if (done) return reward;
  return reward + gamma * target_net.Forward(next_state).maxCoeff();
}

/// DQN learner: main and target networks plus their optimizer.
class DqnLearner {
 public:
  DqnLearner(int state_width, int num_actions, DqnConfig cfg, Rng& init_rng, bool use_target_net = true)
      : cfg_(std::move(cfg)), use_target_net_(use_target_net) {
    cfg_.Validate();
    std::vector<int> sizes{state_width};
    sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    sizes.push_back(num_actions);
    qnet_ = Mlp::HeInit(sizes, init_rng);
    qnet_.params().layers.back().bias.setConstant(cfg_.value_init);
    target_ = qnet_;
    adam_ = AdamState::For(qnet_.params());
  }

  /// One optimizer step on a replay mini-batch. Returns nothing (and leaves
  /// every parameter untouched) while the buffer holds fewer than a batch.
  std::optional<double> Update(const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < static_cast<std::size_t>(cfg_.batch)) return std::nullopt;
    const auto idx = buffer.SampleIndices(static_cast<std::size_t>(cfg_.batch), rng);
    std::vector<const Transition*> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(&buffer[i]);
    return UpdateOnBatch(batch);
  }

  /// Mean Huber TD loss over `batch`, followed by one clipped Adam step.
  /// Only the Q-value of each taken action receives gradient.
  double UpdateOnBatch(std::span<const Transition* const> batch) {
    Expects(!batch.empty(), "DqnLearner::UpdateOnBatch: empty batch");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index w = qnet_.input_width();
    Matrix s(w, n), s2(w, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      s.col(j) = batch[j]->state;
      s2.col(j) = batch[j]->next_state;
    }
    const Matrix q_next = (use_target_net_ ? target_ : qnet_).Forward(s2);
    ForwardCache cache;
    const Matrix q = qnet_.Forward(s, &cache);
    Matrix upstream = Matrix::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Transition& t = *batch[j];
      Expects(t.action >= 0 && t.action < q.rows(), "DqnLearner: action out of range");
      const double target = t.done ? t.reward : t.reward + cfg_.gamma * q_next.col(j).maxCoeff();
      const double delta = q(t.action, j) - target;
      loss += Huber(delta, cfg_.huber_kappa);
      upstream(t.action, j) = HuberGrad(delta, cfg_.huber_kappa) / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    ParamSet grads = qnet_.Backward(cache, upstream).grads;
    ClipGradNorm(grads, cfg_.grad_clip);
    AdamStep(qnet_.params(), grads, adam_, cfg_.lr);
    if (!std::isfinite(loss) || !qnet_.params().AllFinite()) {
      throw std::runtime_error("DQN update produced non-finite loss or parameters");
    }
    return loss;
  }

  /// Copies main into target when t is a multiple of the sync period
  /// (including t = 0). Returns whether a copy happened.
  bool SyncTarget(std::int64_t t) {
    if (t % cfg_.target_sync_every != 0) return false;
    target_ = qnet_;
    return true;
  }

  const Mlp& qnet() const { return qnet_; }
  Mlp& qnet() { return qnet_; }
  const Mlp& target() const { return target_; }
  Mlp& target() { return target_; }
  const AdamState& optimizer() const { return adam_; }
  AdamState& optimizer() { return adam_; }
  const DqnConfig& config() const { return cfg_; }

 private:
  DqnConfig cfg_;
  bool use_target_net_;
  Mlp qnet_;
  Mlp target_;
  AdamState adam_;
};

struct A3cConfig {
  double lr = 3e-4;
  int workers = 16;
  int n_step = 20;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double gamma = 0.99;
  std::vector<int> trunk = {128, 256};
  double grad_clip = 10.0;
  double value_init = 0.0;  // starting critic bias

  void Validate() const {
    Expects(lr > 0.0, "A3cConfig: lr must be positive");
    Expects(workers >= 1, "A3cConfig: workers must be >= 1");
    Expects(n_step >= 1, "A3cConfig: n_step must be >= 1");
    Expects(gamma > 0.0 && gamma < 1.0, "A3cConfig: gamma must lie in (0,1)");
    Expects(!trunk.empty(), "A3cConfig: trunk needs at least one layer");
  }
};

/// Discounted k-step return bootstrapped with `bootstrap_value`, minus the
/// baseline `value_s`; k is the number of rewards. Pass bootstrap 0 when the
/// rollout ended in a terminal state.
inline double NStepAdvantage(std::span<const double> rewards, double bootstrap_value, double value_s, double gamma,
                             int n) {
  Expects(static_cast<int>(rewards.size()) <= n, "NStepAdvantage: more rewards than the horizon");
  double ret = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    ret += discount * r;
    discount *= gamma;
  }
  return ret + discount * bootstrap_value - value_s;
}

struct A3cLossResult {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;  // summed over the rollout
  std::vector<double> advantages;
  ParamSet grads;
};

/// Summed actor-critic loss over a rollout,
///   sum_t -log pi(a_t|s_t) A_t + c_V (V(s_t) - R_t)^2 - c_H H(pi(.|s_t)),
/// where R_t is the bootstrapped return from t to the end of the rollout and
/// A_t = R_t - V(s_t) is held constant during differentiation. Only the last
/// transition may be terminal.
inline A3cLossResult A3cLoss(const ActorCriticNet& net, std::span<const Transition> rollout, const A3cConfig& cfg) {
  if (rollout.empty()) throw ContractViolation("A3cLoss: empty rollout");
  Expects(static_cast<int>(rollout.size()) <= cfg.n_step, "A3cLoss: rollout longer than n_step");
  const auto k = static_cast<Eigen::Index>(rollout.size());
  for (Eigen::Index t = 0; t + 1 < k; ++t) Expects(!rollout[t].done, "A3cLoss: terminal transition before the end");

  Matrix states(net.input_width(), k);
  for (Eigen::Index t = 0; t < k; ++t) states.col(t) = rollout[t].state;
  ActorCriticNet::Cache cache;
  const auto out = net.Forward(states, &cache);

  double bootstrap = 0.0;
  if (!rollout.back().done) bootstrap = net.Forward(Matrix(rollout.back().next_state)).values(0, 0);

  std::vector<double> rewards(rollout.size());
  for (std::size_t t = 0; t < rollout.size(); ++t) rewards[t] = rollout[t].reward;

  A3cLossResult res;
  Matrix logit_grad(out.logits.rows(), k);
  Matrix value_grad(1, k);
  for (Eigen::Index t = 0; t < k; ++t) {
    const double v = out.values(0, t);
    const auto tail = std::span<const double>(rewards).subspan(static_cast<std::size_t>(t));
    const double adv = NStepAdvantage(tail, bootstrap, v, cfg.gamma, cfg.n_step);
    const double v_target = adv + v;
    res.advantages.push_back(adv);

    const Vector pi = Softmax(out.logits.col(t));
    const double h = Entropy(pi);
    const int a = rollout[t].action;
    Expects(a >= 0 && a < pi.size(), "A3cLoss: action out of range");
    const double log_pa = std::log(std::max(pi[a], 1e-300));

    res.policy_loss += -log_pa * adv;
    res.value_loss += cfg.value_coef * (v - v_target) * (v - v_target);
    res.entropy += h;

    for (Eigen::Index j = 0; j < pi.size(); ++j) {
      const double onehot = j == a ? 1.0 : 0.0;
      const double log_pj = pi[j] > 0.0 ? std::log(pi[j]) : 0.0;
      // d(-log pi_a * A)/dz_j = -A (1[j=a] - pi_j);  d(-c_H H)/dz_j = c_H pi_j (log pi_j + H)
      logit_grad(j, t) = -adv * (onehot - pi[j]) + cfg.entropy_coef * pi[j] * (log_pj + h);
    }
    value_grad(0, t) = 2.0 * cfg.value_coef * (v - v_target);
  }
  res.loss = res.policy_loss + res.value_loss - cfg.entropy_coef * res.entropy;
  res.grads = net.Backward(cache, logit_grad, value_grad);
  return res;
}

/// Global actor-critic parameters shared by all workers. Readers copy under
/// the lock; each Apply is one atomic clipped Adam step.
class A3cGlobalStore {
 public:
  A3cGlobalStore(ActorCriticNet net, double lr, double grad_clip)
      : net_(std::move(net)), adam_(AdamState::For(net_.params())), lr_(lr), grad_clip_(grad_clip) {}

  /// Copies the global parameters into `local`.
  void CopyTo(ActorCriticNet& local) const {
    std::lock_guard<std::mutex> lock(mu_);
    CheckHealthy();
    local = net_;
  }

  ActorCriticNet Snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    CheckHealthy();
    return net_;
  }

  /// Applies locally computed gradients; returns the global update count.
  std::int64_t Apply(ParamSet grads) {
    std::lock_guard<std::mutex> lock(mu_);
    CheckHealthy();
    if (!grads.AllFinite()) {
      poisoned_ = true;
      throw std::runtime_error("A3C global store poisoned: non-finite gradients");
    }
    ClipGradNorm(grads, grad_clip_);
    AdamStep(net_.params(), grads, adam_, lr_);
    if (!net_.params().AllFinite()) {
      poisoned_ = true;
      throw std::runtime_error("A3C global store poisoned: non-finite parameters");
    }
    return ++updates_;
  }

  /// Test hook: marks the store corrupt so every later access fails.
  void Poison() {
    std::lock_guard<std::mutex> lock(mu_);
    poisoned_ = true;
  }

  std::int64_t updates() const {
    std::lock_guard<std::mutex> lock(mu_);
    return updates_;
  }
  AdamState optimizer() const {
    std::lock_guard<std::mutex> lock(mu_);
    return adam_;
  }

 private:
  void CheckHealthy() const {
    if (poisoned_) throw std::runtime_error("A3C global store is poisoned; worker aborting");
  }

  mutable std::mutex mu_;
  ActorCriticNet net_;
  AdamState adam_;
  double lr_;
  double grad_clip_;
  bool poisoned_ = false;
  std::int64_t updates_ = 0;
};

/// Samples an action from the softmax policy.
inline int SamplePolicy(const Vector& logits, Rng& rng) {
  const Vector pi = Softmax(logits);
  const double u = Uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    acc += pi[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(pi.size() - 1);
}

/// Accumulates a rollout and pushes one update to the global store whenever
/// it reaches n_step transitions or ends in a terminal state.
class RolloutUpdater {
 public:
  RolloutUpdater(A3cGlobalStore& store, A3cConfig cfg) : store_(&store), cfg_(std::move(cfg)) {
    store_->CopyTo(local_);
  }

  const ActorCriticNet& local() const { return local_; }

  /// Returns the summed loss when this transition triggered an update.
  std::optional<double> Observe(Transition t) {
    const bool done = t.done;
    rollout_.push_back(std::move(t));
    if (!done && static_cast<int>(rollout_.size()) < cfg_.n_step) return std::nullopt;
    return Flush();
  }

  /// Updates on whatever has been collected so far.
  std::optional<double> Flush() {
    if (rollout_.empty()) return std::nullopt;
    A3cLossResult res = A3cLoss(local_, rollout_, cfg_);
    rollout_.clear();
    store_->Apply(std::move(res.grads));
    store_->CopyTo(local_);
    return res.loss;
  }

 private:
  A3cGlobalStore* store_;
  A3cConfig cfg_;
  ActorCriticNet local_;
  std::vector<Transition> rollout_;
};

/// Actor-critic worker acting on its own environment replica with its own
/// random stream.
class A3cWorker {
 public:
  A3cWorker(A3cGlobalStore& store, std::unique_ptr<Environment> env, A3cConfig cfg, Rng rng)
      : env_(std::move(env)), updater_(store, std::move(cfg)), rng_(std::move(rng)) {
    obs_ = env_->Reset();
  }

  /// One environment step; returns the loss if the step completed a rollout.
  std::optional<double> StepOnce() {
    const int a = SamplePolicy(updater_.local().Forward(Matrix(obs_)).logits.col(0), rng_);
    EnvStep s = env_->Step(a);
    Transition t{obs_, a, s.reward, s.observation, s.done};
    obs_ = s.done ? env_->Reset() : s.observation;
    ++steps_;
    return updater_.Observe(std::move(t));
  }

  /// Steps until one update has been applied to the global store.
  double RunRollout() {
    for (;;) {
      if (auto loss = StepOnce()) return *loss;
    }
  }

  std::int64_t steps() const { return steps_; }

 private:
  std::unique_ptr<Environment> env_;
  RolloutUpdater updater_;
  Rng rng_;
  Vector obs_;
  std::int64_t steps_ = 0;
};

struct FusionSchedule {
  double alpha_start = 0.3;
  double alpha_end = 0.7;
  std::int64_t total_steps = 100000;

  void Validate() const {
    Expects(0.0 <= alpha_start && alpha_start <= alpha_end && alpha_end <= 1.0,
            "FusionSchedule: need 0 <= alpha_start <= alpha_end <= 1");
    Expects(total_steps >= 1, "FusionSchedule: total_steps must be >= 1");
  }
};

/// Weight of the DQN candidate at step t; rises linearly over the horizon.
inline double Alpha(std::int64_t t, const FusionSchedule& sched) {
  const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(sched.total_steps));
  return sched.alpha_start + frac * (sched.alpha_end - sched.alpha_start);
}

/// Picks the DQN candidate with probability alpha.
inline int Fuse(int dqn_action, int a3c_action, double alpha, Rng& rng) {
  Expects(alpha >= 0.0 && alpha <= 1.0, "Fuse: alpha must lie in [0,1]");
  if (alpha >= 1.0) return dqn_action;
  if (alpha <= 0.0) return a3c_action;
  return Uniform01(rng) < alpha ? dqn_action : a3c_action;
}

enum class FusionMode {
  kProbabilistic,  // choose one candidate with probability alpha
  kBlend,          // argmax of alpha * softmax(Q) + (1 - alpha) * pi
};

/// Deterministic blend of both networks' preferences.
inline int BlendActions(const Vector& q_values, const Vector& logits, double alpha) {
  return Argmax(alpha * Softmax(q_values) + (1.0 - alpha) * Softmax(logits));
}

}  // namespace ratelab
