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

// Training loop for the hybrid agent.
//
// The loop drives one environment for `training_steps` interactions. Each
// step both learners propose an action, the fusion picks one, the
// environment advances, the transition goes to the replay buffer and to the
// main actor-critic rollout, a DQN mini-batch update runs once the buffer
// holds a batch, and the target network syncs on its cadence. Episodes are
// fixed-horizon; the horizon bootstraps, only overload collapse is terminal.
//
// With a3c.workers = W > 1, W - 1 extra actor-critic workers run on their
// own environment replicas in background threads. They are paced to the
// main loop (a worker never gets ahead of the main step count), so the ratio
// of worker to main experience stays fixed however threads are scheduled.
// With W = 1 there are no threads and a run is bit-reproducible.

#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ratelab/checkpoint.hpp"
#include "ratelab/config.hpp"
#include "ratelab/environment.hpp"
#include "ratelab/hybrid.hpp"

namespace ratelab {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeRecord {
  std::int64_t episode = 0;
  std::int64_t end_step = 0;  // environment interactions completed
  std::int64_t length = 0;
  double cum_reward = 0.0;
  double epsilon = 0.0;       // at the episode's last step
  double alpha = 0.0;
  double mean_dqn_loss = std::numeric_limits<double>::quiet_NaN();
  double mean_a3c_loss = std::numeric_limits<double>::quiet_NaN();
  bool terminal = false;      // ended by overload collapse
};

struct UpdateRecord {
  std::int64_t step = 0;
  double dqn_loss = std::numeric_limits<double>::quiet_NaN();
  double a3c_loss = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceLog {
  std::vector<EpisodeRecord> episodes;
  std::vector<UpdateRecord> updates;
  std::vector<double> epsilon_trace;  // per step
  std::vector<double> alpha_trace;    // per step
  std::vector<double> episode_wall_seconds;
  double wall_seconds = 0.0;
  std::int64_t background_updates = 0;  // global actor-critic updates from extra workers
};

struct TrainResult {
  std::unique_ptr<HybridAgent> agent;
  ConvergenceLog log;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
};

/// Seeded environment for an experiment.
inline std::unique_ptr<Environment> MakeEnvironment(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.environment == EnvKind::kBandit) return std::make_unique<BanditEnv>(cfg.bandit_rewards);
  EnvConfig env = cfg.env;
  env.seed = seed;
  return std::make_unique<RateLimitEnv>(env, cfg.pattern, cfg.reward, cfg.ablation.no_temporal);
}

inline std::unique_ptr<HybridAgent> MakeAgent(const ExperimentConfig& cfg, const Environment& env, std::uint64_t seed) {
  DqnConfig dqn = cfg.dqn;
  A3cConfig a3c = cfg.a3c;
  dqn.value_init = a3c.value_init = cfg.ValueInit();
  return std::make_unique<HybridAgent>(env.state_width(), env.num_actions(), std::move(dqn), std::move(a3c),
                                       cfg.EffectiveFusion(), cfg.Options(), seed);
}

/// Extra actor-critic workers in background threads, paced to the main loop.
class PacedWorkers {
 public:
  static constexpr std::uint64_t kWorkerStream = 0xA3C0;

  PacedWorkers(A3cGlobalStore& store, const Environment& prototype, const A3cConfig& cfg, std::uint64_t seed,
               int count) {
    for (int i = 0; i < count; ++i) {
      const auto id = static_cast<std::uint64_t>(i + 1);
      workers_.push_back(
          std::make_unique<A3cWorker>(store, prototype.Replica(id), cfg, MakeRng(seed, {kWorkerStream, id})));
    }
    for (std::size_t i = 0; i < workers_.size(); ++i) threads_.emplace_back([this, i] { Run(i); });
  }

  PacedWorkers(const PacedWorkers&) = delete;
  PacedWorkers& operator=(const PacedWorkers&) = delete;

  ~PacedWorkers() { Stop(); }

  /// Lets workers advance up to `main_steps` environment steps each.
  void Advance(std::int64_t main_steps) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      budget_ = main_steps;
      if (error_) std::rethrow_exception(error_);
    }
    cv_.notify_all();
  }

  /// Joins all threads and returns the number of updates they applied.
  std::int64_t Stop() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
    return updates_;
  }

  std::exception_ptr error() const {
    std::lock_guard<std::mutex> lock(mu_);
    return error_;
  }

 private:
  void Run(std::size_t index) {
    A3cWorker& w = *workers_[index];
    try {
      for (;;) {
        {
          std::unique_lock<std::mutex> lock(mu_);
          cv_.wait(lock, [&] { return stop_ || w.steps() < budget_; });
          if (stop_) return;
        }
        if (w.StepOnce()) {
          std::lock_guard<std::mutex> lock(mu_);
          ++updates_;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_) error_ = std::current_exception();
      stop_ = true;
      cv_.notify_all();
    }
  }

  std::vector<std::unique_ptr<A3cWorker>> workers_;
  std::vector<std::thread> threads_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::int64_t budget_ = 0;
  std::int64_t updates_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

struct CheckpointManifest {
  std::int64_t step = 0;
  double alpha = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

/// Writes dqn_main.ckpt, dqn_target.ckpt, a3c_global.ckpt and manifest.txt
/// into `dir`.
inline void SaveAgent(const HybridAgent& agent, const std::string& dir, const CheckpointManifest& m) {
  std::filesystem::create_directories(dir);
  SaveCheckpoint(dir + "/dqn_main.ckpt", Checkpoint::Of(agent.dqn().qnet(), agent.dqn().optimizer()));
  SaveCheckpoint(dir + "/dqn_target.ckpt", Checkpoint::Of(agent.dqn().target()));
  SaveCheckpoint(dir + "/a3c_global.ckpt", Checkpoint::Of(agent.store().Snapshot(), agent.store().optimizer()));
  std::ofstream os(dir + "/manifest.txt");
  os.precision(17);
  os << "format_version = " << kCheckpointVersion << "\n"
     << "step = " << m.step << "\n"
     << "alpha = " << m.alpha << "\n"
     << "epsilon = " << m.epsilon << "\n"
     << "seed = " << m.seed << "\n"
     << "act_stream = " << HybridAgent::kActStream << "\n"
     << "learn_stream = " << HybridAgent::kLearnStream << "\n"
     << "dqn_main = dqn_main.ckpt\n"
     << "dqn_target = dqn_target.ckpt\n"
     << "a3c_global = a3c_global.ckpt\n";
  if (!os) throw CheckpointError("cannot write manifest in " + dir);
}

/// Rebuilds an agent for `cfg` and loads the three networks from `dir`.
inline std::unique_ptr<HybridAgent> LoadAgent(const ExperimentConfig& cfg, const std::string& dir, std::uint64_t seed) {
  auto env = MakeEnvironment(cfg, seed);
  auto agent = MakeAgent(cfg, *env, seed);
  agent->LoadNetworks(LoadCheckpoint(dir + "/dqn_main.ckpt").ToMlp(), LoadCheckpoint(dir + "/dqn_target.ckpt").ToMlp(),
                      LoadCheckpoint(dir + "/a3c_global.ckpt").ToActorCritic());
  return agent;
}

/// Runs the full training loop for one seed. When `diagnostic_dir` is set,
/// a failed run leaves its last networks there before throwing.
inline TrainResult Train(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& diagnostic_dir = {}) {
  cfg.Validate();
  TrainResult res;
  res.seed = seed;
  auto env = MakeEnvironment(cfg, seed);
  res.agent = MakeAgent(cfg, *env, seed);
  HybridAgent& agent = *res.agent;
  ConvergenceLog& log = res.log;
  if (cfg.training_steps == 0) return res;

  const auto wall_start = std::chrono::steady_clock::now();
  auto episode_start = wall_start;
  std::unique_ptr<PacedWorkers> workers;
  const int extra = agent.options().use_a3c ? cfg.a3c.workers - 1 : 0;
  if (extra > 0) workers = std::make_unique<PacedWorkers>(agent.store(), *env, cfg.a3c, seed, extra);

  log.epsilon_trace.reserve(static_cast<std::size_t>(cfg.training_steps));
  log.alpha_trace.reserve(static_cast<std::size_t>(cfg.training_steps));

  Vector obs = env->Reset();
  EpisodeRecord ep;
  double dqn_loss_sum = 0.0, a3c_loss_sum = 0.0;
  std::int64_t dqn_n = 0, a3c_n = 0;

  try {
    for (std::int64_t t = 0; t < cfg.training_steps; ++t) {
      const auto d = agent.Act(obs, t);
      EnvStep s = env->Step(d.chosen);
      const std::int64_t step = t + 1;
      auto stats = agent.Learn({obs, d.chosen, s.reward, s.observation, s.done}, step);
      if (workers) workers->Advance(step);

      log.epsilon_trace.push_back(d.epsilon);
      log.alpha_trace.push_back(d.alpha);
      ++ep.length;
      ep.cum_reward += s.reward;
      const bool episode_over = s.done || ep.length >= cfg.episode_horizon;
      if (episode_over) {
        if (auto l = agent.FlushRollout()) stats.a3c_loss = l;
      }
      if (stats.dqn_loss || stats.a3c_loss) {
        UpdateRecord u;
        u.step = step;
        if (stats.dqn_loss) {
          u.dqn_loss = *stats.dqn_loss;
          dqn_loss_sum += u.dqn_loss;
          ++dqn_n;
        }
        if (stats.a3c_loss) {
          u.a3c_loss = *stats.a3c_loss;
          a3c_loss_sum += u.a3c_loss;
          ++a3c_n;
        }
        log.updates.push_back(u);
      }

      if (episode_over) {
        ep.episode = static_cast<std::int64_t>(log.episodes.size());
        ep.end_step = step;
        ep.epsilon = d.epsilon;
        ep.alpha = d.alpha;
        ep.terminal = s.done;
        if (dqn_n) ep.mean_dqn_loss = dqn_loss_sum / static_cast<double>(dqn_n);
        if (a3c_n) ep.mean_a3c_loss = a3c_loss_sum / static_cast<double>(a3c_n);
        log.episodes.push_back(ep);
        const auto now = std::chrono::steady_clock::now();
        log.episode_wall_seconds.push_back(std::chrono::duration<double>(now - episode_start).count());
        episode_start = now;
        ep = EpisodeRecord{};
        dqn_loss_sum = a3c_loss_sum = 0.0;
        dqn_n = a3c_n = 0;
        obs = env->Reset();
      } else {
        obs = s.observation;
      }
    }
  } catch (const std::exception& e) {
    if (workers) workers->Stop();
    if (!diagnostic_dir.empty()) {
      try {
        SaveAgent(agent, diagnostic_dir + "/diagnostic", {res.steps, 0.0, 0.0, seed});
      } catch (const std::exception&) {
        // Best effort only; a poisoned store cannot be snapshotted.
      }
    }
    throw TrainingError(std::string("training aborted: ") + e.what());
  }
  if (workers) {
    log.background_updates = workers->Stop();
    if (auto err = workers->error()) {
      try {
        std::rethrow_exception(err);
      } catch (const std::exception& e) {
        throw TrainingError(std::string("actor-critic worker failed: ") + e.what());
      }
    }
  }
  agent.RefreshLocal();
  res.steps = cfg.training_steps;
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

}  // namespace ratelab
