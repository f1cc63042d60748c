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

#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "ratelab/agents.hpp"

namespace ratelab {

struct HybridOptions {
  bool use_replay = true;
  bool use_target_net = true;
  bool use_a3c = true;
  FusionMode fusion_mode = FusionMode::kProbabilistic;
};

enum class EvalMode {
  kFused,          // greedy DQN and argmax policy, fused with the final alpha
  kDeterministic,  // greedy DQN when alpha >= 0.5, argmax policy otherwise
};

/// DQN learner, global actor-critic store and the fusion between them, fed
/// from a single executed trajectory: both learners see every transition
/// regardless of which candidate was executed.
class HybridAgent {
 public:
  // Random stream tags.
  static constexpr std::uint64_t kInitStream = 0x1001;
  static constexpr std::uint64_t kActStream = 0x1002;
  static constexpr std::uint64_t kLearnStream = 0x1003;

  struct Decision {
    int dqn = 0;
    int a3c = 0;
    int chosen = 0;
    double alpha = 1.0;
    double epsilon = 0.0;
  };

  struct LearnStats {
    std::optional<double> dqn_loss;
    std::optional<double> a3c_loss;
    bool synced = false;
  };

  HybridAgent(int state_width, int num_actions, DqnConfig dqn, A3cConfig a3c, FusionSchedule fusion,
              HybridOptions options, std::uint64_t seed)
      : options_(options),
        a3c_cfg_(std::move(a3c)),
        fusion_(fusion),
        replay_(dqn.replay_capacity),
        act_rng_(MakeRng(seed, {kActStream})),
        learn_rng_(MakeRng(seed, {kLearnStream})) {
    a3c_cfg_.Validate();
    fusion_.Validate();
    Rng init = MakeRng(seed, {kInitStream});
    dqn_ = std::make_unique<DqnLearner>(state_width, num_actions, std::move(dqn), init, options_.use_target_net);
    std::vector<int> trunk{state_width};
    trunk.insert(trunk.end(), a3c_cfg_.trunk.begin(), a3c_cfg_.trunk.end());
    ActorCriticNet ac = ActorCriticNet::HeInit(trunk, num_actions, init);
    ac.params().layers.back().bias.setConstant(a3c_cfg_.value_init);  // critic head is the last layer
    store_ = std::make_unique<A3cGlobalStore>(std::move(ac), a3c_cfg_.lr, a3c_cfg_.grad_clip);
    rollout_ = std::make_unique<RolloutUpdater>(*store_, a3c_cfg_);
  }

  double AlphaAt(std::int64_t t) const { return options_.use_a3c ? Alpha(t, fusion_) : 1.0; }
  double EpsilonAt(std::int64_t t) const { return Epsilon(t, dqn_->config()); }

  /// Behaviour policy at training step t.
  Decision Act(const Vector& obs, std::int64_t t) {
    Decision d;
    d.alpha = AlphaAt(t);
    d.epsilon = EpsilonAt(t);
    d.dqn = SelectDqn(dqn_->qnet(), obs, d.epsilon, act_rng_);
    if (!options_.use_a3c) {
      d.a3c = d.chosen = d.dqn;
      return d;
    }
    const Vector logits = rollout_->local().Forward(Matrix(obs)).logits.col(0);
    d.a3c = SamplePolicy(logits, act_rng_);
    if (options_.fusion_mode == FusionMode::kBlend) {
      d.chosen = Uniform01(act_rng_) < d.epsilon ? d.dqn : BlendActions(dqn_->qnet().Forward(obs), logits, d.alpha);
    } else {
      d.chosen = Fuse(d.dqn, d.a3c, d.alpha, act_rng_);
    }
    return d;
  }

  /// Feeds one executed transition to both learners. `step` counts
  /// environment interactions completed so far (1 after the first).
  LearnStats Learn(Transition t, std::int64_t step) {
    LearnStats stats;
    if (options_.use_a3c) stats.a3c_loss = rollout_->Observe(t);
    if (options_.use_replay) {
      replay_.Add(std::move(t));
      stats.dqn_loss = dqn_->Update(replay_, learn_rng_);
    } else {
      const Transition* single = &t;
      stats.dqn_loss = dqn_->UpdateOnBatch(std::span<const Transition* const>(&single, 1));
    }
    stats.synced = dqn_->SyncTarget(step);
    return stats;
  }

  /// Pushes a partial rollout, e.g. at an episode boundary.
  std::optional<double> FlushRollout() { return options_.use_a3c ? rollout_->Flush() : std::nullopt; }

  /// Frozen policy used for evaluation.
  int Decide(const Vector& obs, double alpha, EvalMode mode, Rng& rng) const {
    const Vector q = dqn_->qnet().Forward(obs);
    const int greedy = Argmax(q);
    if (!options_.use_a3c) return greedy;
    const Vector logits = rollout_->local().Forward(Matrix(obs)).logits.col(0);
    const int policy = Argmax(logits);
    if (mode == EvalMode::kDeterministic) return alpha >= 0.5 ? greedy : policy;
    if (options_.fusion_mode == FusionMode::kBlend) return BlendActions(q, logits, alpha);
    return Fuse(greedy, policy, alpha, rng);
  }

  /// Fusion weight at the end of training.
  double FinalAlpha() const { return options_.use_a3c ? fusion_.alpha_end : 1.0; }

  DqnLearner& dqn() { return *dqn_; }
  const DqnLearner& dqn() const { return *dqn_; }
  A3cGlobalStore& store() { return *store_; }
  const A3cGlobalStore& store() const { return *store_; }
  const ActorCriticNet& local_actor_critic() const { return rollout_->local(); }
  const ReplayBuffer& replay() const { return replay_; }
  const HybridOptions& options() const { return options_; }
  const A3cConfig& a3c_config() const { return a3c_cfg_; }
  const FusionSchedule& fusion() const { return fusion_; }

  /// Re-reads the global actor-critic parameters into the acting copy.
  void RefreshLocal() { rollout_ = std::make_unique<RolloutUpdater>(*store_, a3c_cfg_); }

  /// Replaces network parameters, e.g. after loading checkpoints.
  void LoadNetworks(const Mlp& qnet, const Mlp& target, const ActorCriticNet& actor_critic) {
    dqn_->qnet() = qnet;
    dqn_->target() = target;
    store_ = std::make_unique<A3cGlobalStore>(actor_critic, a3c_cfg_.lr, a3c_cfg_.grad_clip);
    RefreshLocal();
  }

 private:
  HybridOptions options_;
  A3cConfig a3c_cfg_;
  FusionSchedule fusion_;
  ReplayBuffer replay_;
  Rng act_rng_;
  Rng learn_rng_;
  std::unique_ptr<DqnLearner> dqn_;
  std::unique_ptr<A3cGlobalStore> store_;
  std::unique_ptr<RolloutUpdater> rollout_;
};

}  // namespace ratelab
