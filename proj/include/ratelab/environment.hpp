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

// Episodic environments seen by the learning agents: the rate-limited
// service and a one-state bandit used as a convergence oracle.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "ratelab/core_types.hpp"
#include "ratelab/env_sim.hpp"
#include "ratelab/neural.hpp"
#include "ratelab/reward.hpp"

namespace ratelab {

struct EnvStep {
  Vector observation;
  double reward = 0.0;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  /// Starts a new episode and returns its first observation.
  virtual Vector Reset() = 0;
  virtual EnvStep Step(int action) = 0;
  virtual int state_width() const = 0;
  virtual int num_actions() const = 0;
  /// Independent copy for a parallel worker; streams never collide with the
  /// original's.
  virtual std::unique_ptr<Environment> Replica(std::uint64_t worker_id) const = 0;
};

/// Keeps the current threshold when a change is proposed sooner than
/// `min_interval` seconds after the previous change.
inline double MinIntervalGuard(double last_change_time, double now, double proposed, double current,
                               double min_interval) {
  if (proposed != current && now - last_change_time < min_interval) return current;
  return proposed;
}

/// Stateful wrapper around MinIntervalGuard that tracks the last change.
class ChangeGuard {
 public:
  explicit ChangeGuard(double min_interval = 30.0) : min_interval_(min_interval) {}

  double Apply(double now, double proposed, double current) {
    const double applied = MinIntervalGuard(last_change_, now, proposed, current, min_interval_);
    if (applied != current) last_change_ = now;
    return applied;
  }

  void Reset() { last_change_ = -std::numeric_limits<double>::infinity(); }
  double last_change() const { return last_change_; }

 private:
  double min_interval_;
  double last_change_ = -std::numeric_limits<double>::infinity();
};

/// Everything produced by one rate-limiter step.
struct RateLimitStep {
  EnvStep rl;
  StepOutcome outcome;
  double theta_before = 0.0;
  double theta_applied = 0.0;
  int effective_action = kNoChangeAction;
  double r_throughput = 0.0;
  double r_latency = 0.0;
  double r_stability = 0.0;
};

/// The simulated service as an RL environment. Actions are indices into the
/// seven threshold multipliers; baselines can also drive it with raw
/// thresholds through StepThreshold.
class RateLimitEnv : public Environment {
 public:
  // Consecutive all-error steps that end an episode as overload collapse.
  static constexpr int kCollapseSteps = 5;

  RateLimitEnv(EnvConfig env, TrafficPattern pattern, RewardConfig reward, bool zero_temporal = false,
               std::uint64_t worker_id = 0)
      : cfg_(env),
        pattern_(pattern),
        reward_(reward),
        norm_(NormalizationSpec::ForExperiment(env.bounds, reward.latency_target_ms, env.queue_capacity)),
        zero_temporal_(zero_temporal),
        worker_id_(worker_id),
        guard_(env.min_change_interval) {
    cfg_.Validate();
    pattern_.Validate();
    reward_.Validate();
    norm_.ewma_beta = cfg_.smoothing_beta;
    state_ = ratelab::Reset(cfg_, pattern_, Stream());
  }

  Vector Reset() override {
    ++episode_;
    state_ = ratelab::Reset(cfg_, pattern_, Stream());
    guard_.Reset();
    collapse_run_ = 0;
    return Observe();
  }

  /// Restarts from a caller-chosen stream (evaluation runs use streams
  /// disjoint from training episodes).
  Vector ResetWithStream(std::uint64_t stream) {
    state_ = ratelab::Reset(cfg_, pattern_, stream);
    guard_.Reset();
    collapse_run_ = 0;
    return Observe();
  }

  EnvStep Step(int action) override {
    const double proposed = ApplyAction(state_.state.threshold, Action::FromIndex(action), cfg_.bounds);
    return StepThreshold(proposed).rl;
  }

  /// Proposes a raw threshold; clamping and the minimum change interval
  /// apply.
  RateLimitStep StepThreshold(double proposed) {
    RateLimitStep res;
    res.theta_before = state_.state.threshold;
    const double clamped = cfg_.bounds.Clamp(proposed);
    res.theta_applied = guard_.Apply(state_.sim_time, clamped, res.theta_before);
    res.effective_action = res.theta_applied == res.theta_before ? kNoChangeAction : ClosestAction(res);
    res.outcome = ratelab::Step(state_, cfg_, res.theta_applied);
    const StepOutcome& o = res.outcome;
    res.r_throughput = ThroughputReward(o.n_completed(), o.n_offered + o.n_dequeued);
    res.r_latency = LatencyReward(o.MeanLatency(), reward_);
    res.r_stability = StabilityReward(res.theta_before, res.theta_applied);
    res.rl.reward = TotalReward(res.r_throughput, res.r_latency, res.r_stability, reward_);
    collapse_run_ = o.next_state.error_rate >= 1.0 ? collapse_run_ + 1 : 0;
    res.rl.done = collapse_run_ >= kCollapseSteps;
    res.rl.observation = Observe();
    return res;
  }

  Vector Observe() const {
    auto enc = EncodeState(state_.state, norm_);
    if (zero_temporal_) enc[7] = enc[8] = 0.0;
    return Eigen::Map<const Vector>(enc.data(), static_cast<Eigen::Index>(enc.size()));
  }

  int state_width() const override { return static_cast<int>(kStateWidth); }
  int num_actions() const override { return static_cast<int>(kNumActions); }

  std::unique_ptr<Environment> Replica(std::uint64_t worker_id) const override {
    return std::make_unique<RateLimitEnv>(cfg_, pattern_, reward_, zero_temporal_, worker_id);
  }

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const TrafficPattern& pattern() const { return pattern_; }
  const RewardConfig& reward_config() const { return reward_; }
  const NormalizationSpec& normalization() const { return norm_; }
  std::uint64_t episode() const { return episode_; }

 private:
  std::uint64_t Stream() const { return (worker_id_ << 32) | (episode_ & 0xffffffffu); }

  // Index of the action whose multiplier is nearest the applied change;
  // exact for agent actions, approximate for baseline thresholds.
  static int ClosestAction(const RateLimitStep& r) {
    const double change = r.theta_applied / r.theta_before - 1.0;
    int best = 0;
    for (int i = 1; i < static_cast<int>(kNumActions); ++i) {
      if (std::abs(kActionMultipliers[i] - change) < std::abs(kActionMultipliers[best] - change)) best = i;
    }
    return best;
  }

  EnvConfig cfg_;
  TrafficPattern pattern_;
  RewardConfig reward_;
  NormalizationSpec norm_;
  bool zero_temporal_;
  std::uint64_t worker_id_;
  std::uint64_t episode_ = 0;
  ChangeGuard guard_;
  int collapse_run_ = 0;
  EnvState state_;
};

/// One state, `arm_rewards.size()` actions, every pull terminal. The optimal
/// greedy action is the arm with the largest reward and Q* equals the reward
/// vector.
class BanditEnv : public Environment {
 public:
  explicit BanditEnv(std::vector<double> arm_rewards = {0.0, 1.0}, int state_width = static_cast<int>(kStateWidth))
      : rewards_(std::move(arm_rewards)), width_(state_width) {
    Expects(rewards_.size() >= 2, "BanditEnv: need at least two arms");
  }

  Vector Reset() override { return Vector::Constant(width_, 0.5); }

  EnvStep Step(int action) override {
    Expects(action >= 0 && action < num_actions(), "BanditEnv: action out of range");
    return {Vector::Constant(width_, 0.5), rewards_[static_cast<std::size_t>(action)], true};
  }

  int state_width() const override { return width_; }
  int num_actions() const override { return static_cast<int>(rewards_.size()); }
  std::unique_ptr<Environment> Replica(std::uint64_t) const override { return std::make_unique<BanditEnv>(*this); }

  int optimal_action() const {
    int best = 0;
    for (int i = 1; i < num_actions(); ++i) {
      if (rewards_[i] > rewards_[best]) best = i;
    }
    return best;
  }

 private:
  std::vector<double> rewards_;
  int width_;
};

}  // namespace ratelab
