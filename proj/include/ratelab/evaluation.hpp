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

// Frozen-policy evaluation, baseline comparison, ablation and baseline
// tuning.
//
// Every policy evaluated for a given seed sees the same random stream
// (traffic noise, bursts, capacity drift and latency draws), so differences
// between rows come from the policies alone.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "ratelab/baselines.hpp"
#include "ratelab/config.hpp"
#include "ratelab/environment.hpp"
#include "ratelab/hybrid.hpp"
#include "ratelab/metrics.hpp"
#include "ratelab/training.hpp"

namespace ratelab {

// Random stream of evaluation runs; disjoint from training episodes, which
// use (worker << 32) | episode with episode < 2^32.
inline constexpr std::uint64_t kEvalStream = 0xE7A1'0000'0000'0000ULL;
inline constexpr std::uint64_t kEvalPolicyStream = 0xE7A2;
// Offset between evaluation seeds and the seeds used to tune baselines.
inline constexpr std::uint64_t kTuningSeedOffset = 1000;

/// Trained hybrid agent acting as a threshold controller.
class AgentController : public Controller {
 public:
  AgentController(const HybridAgent& agent, NormalizationSpec norm, ThresholdBounds bounds, bool zero_temporal,
                  EvalMode mode, std::uint64_t seed, std::string name = "hybrid")
      : agent_(agent),
        norm_(norm),
        bounds_(bounds),
        zero_temporal_(zero_temporal),
        mode_(mode),
        alpha_(agent.FinalAlpha()),
        seed_(seed),
        rng_(MakeRng(seed, {kEvalPolicyStream})),
        name_(std::move(name)) {}

  std::string name() const override { return name_; }

  int Action(const SystemState& s) {
    auto enc = EncodeState(s, norm_);
    if (zero_temporal_) enc[7] = enc[8] = 0.0;
    const Vector obs = Eigen::Map<const Vector>(enc.data(), static_cast<Eigen::Index>(enc.size()));
    return agent_.Decide(obs, alpha_, mode_, rng_);
  }

  double Decide(const SystemState& s) override {
    return ApplyAction(s.threshold, Action::FromIndex(Action(s)), bounds_);
  }

  void Reset() override { rng_ = MakeRng(seed_, {kEvalPolicyStream}); }

 private:
  const HybridAgent& agent_;
  NormalizationSpec norm_;
  ThresholdBounds bounds_;
  bool zero_temporal_;
  EvalMode mode_;
  double alpha_;
  std::uint64_t seed_;
  Rng rng_;
  std::string name_;
};

struct TraceRow {
  std::int64_t step = 0;
  double sim_time = 0.0;
  double offered_rate = 0.0;
  double capacity = 0.0;
  double proposed = 0.0;
  double threshold = 0.0;
  std::int64_t offered = 0;
  std::int64_t admitted = 0;
  std::int64_t completed = 0;
  std::int64_t rejected = 0;
  std::int64_t errors = 0;
  std::int64_t queue = 0;
  double cpu = 0.0;
  double mem = 0.0;
  double latency_ms = 0.0;
  double reward = 0.0;
};

inline NormalizationSpec NormalizationFor(const ExperimentConfig& cfg) {
  auto n = NormalizationSpec::ForExperiment(cfg.env.bounds, cfg.reward.latency_target_ms, cfg.env.queue_capacity);
  n.ewma_beta = cfg.env.smoothing_beta;
  return n;
}

/// Runs `controller` frozen for cfg.eval_duration steps on the rate-limit
/// environment seeded with `seed`.
inline EvalReport Evaluate(Controller& controller, const ExperimentConfig& cfg, std::uint64_t seed,
                           std::vector<TraceRow>* trace = nullptr) {
  if (cfg.environment != EnvKind::kRateLimit) throw ConfigError("Evaluate needs the rate-limit environment");
  EnvConfig ec = cfg.env;
  ec.seed = seed;
  RateLimitEnv env(ec, cfg.pattern, cfg.reward, cfg.ablation.no_temporal);
  env.ResetWithStream(kEvalStream);
  controller.Reset();

  const EvalConstraints& limits = cfg.constraints;
  EvalReport r;
  std::vector<LatencySample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.eval_duration * ec.latency_samples));
  double reward_sum = 0.0, cpu_sum = 0.0, mem_sum = 0.0, theta_sum = 0.0, err_sum = 0.0;
  std::int64_t over_resource = 0, out_of_range = 0;
  if (trace) trace->clear();

  for (std::int64_t t = 0; t < cfg.eval_duration; ++t) {
    const double proposed = controller.Decide(env.state().state);
    const RateLimitStep s = env.StepThreshold(proposed);
    const StepOutcome& o = s.outcome;
    const SystemState& n = o.next_state;
    r.offered += o.n_offered;
    r.completed += o.n_completed();
    samples.insert(samples.end(), o.latency_samples.begin(), o.latency_samples.end());
    reward_sum += s.rl.reward;
    cpu_sum += n.cpu_util;
    mem_sum += n.mem_util;
    theta_sum += s.theta_applied;
    err_sum += n.error_rate;
    if (std::max(n.cpu_util, n.mem_util) > limits.resource_max) ++over_resource;
    if (!ec.bounds.Contains(s.theta_applied)) ++out_of_range;
    if (trace) {
      trace->push_back({t, env.state().sim_time, static_cast<double>(o.n_offered) / ec.step_duration, o.capacity,
                        proposed, s.theta_applied, o.n_offered, o.n_admitted, o.n_completed(), o.n_rejected,
                        o.n_errors, env.state().queue, n.cpu_util, n.mem_util, n.avg_latency_ms, s.rl.reward});
    }
  }

  const auto steps = static_cast<double>(cfg.eval_duration);
  r.steps = cfg.eval_duration;
  r.degenerate = r.offered == 0;
  r.throughput = static_cast<double>(r.completed) / (steps * ec.step_duration);
  r.availability = r.offered > 0 ? std::min(1.0, static_cast<double>(r.completed) / static_cast<double>(r.offered)) : 1.0;
  if (!samples.empty()) {
    r.latency_p50 = WeightedPercentile(samples, 0.50);
    r.latency_p90 = WeightedPercentile(samples, 0.90);
    r.latency_p99 = WeightedPercentile(samples, 0.99);
    double total = 0.0, within = 0.0, over = 0.0;
    for (const auto& x : samples) {
      total += x.weight;
      if (x.ms <= cfg.reward.latency_target_ms) within += x.weight;
      if (x.ms > limits.latency_max_ms) over += x.weight;
    }
    r.sla_compliance = within / total;
    r.latency_over_max_fraction = over / total;
  } else {
    r.sla_compliance = 1.0;
  }
  r.mean_cpu = cpu_sum / steps;
  r.mean_mem = mem_sum / steps;
  r.mean_threshold = theta_sum / steps;
  r.mean_reward = reward_sum / steps;
  r.composite = r.mean_reward * static_cast<double>(cfg.episode_horizon);
  r.mean_error_rate = err_sum / steps;
  r.resource_over_fraction = static_cast<double>(over_resource) / steps;
  r.threshold_out_of_range_fraction = static_cast<double>(out_of_range) / steps;
  r.latency_constraint_ok = r.latency_over_max_fraction <= limits.latency_violation;
  r.error_constraint_ok = r.mean_error_rate <= limits.error_budget;
  r.resource_constraint_ok = r.resource_over_fraction <= limits.latency_violation;
  return r;
}

inline EvalMode EvalModeFor(const ExperimentConfig& cfg) {
  return cfg.deterministic_eval ? EvalMode::kDeterministic : EvalMode::kFused;
}

inline EvalReport EvaluateAgent(const HybridAgent& agent, const ExperimentConfig& cfg, std::uint64_t seed,
                                std::vector<TraceRow>* trace = nullptr) {
  AgentController c(agent, NormalizationFor(cfg), cfg.env.bounds, cfg.ablation.no_temporal, EvalModeFor(cfg), seed);
  return Evaluate(c, cfg, seed, trace);
}

/// Baseline controller by name: fixed, fixed_untuned, cpu, aimd, pid.
inline std::unique_ptr<Controller> MakeBaseline(const std::string& name, const ExperimentConfig& cfg,
                                                ControllerConfig cc) {
  if (cc.fixed_threshold <= 0.0 || name == "fixed_untuned") cc.fixed_threshold = cfg.env.service_capacity;
  const auto& b = cfg.env.bounds;
  if (name == "fixed" || name == "fixed_untuned") return std::make_unique<FixedThresholdController>(cc, b);
  if (name == "cpu") return std::make_unique<CpuProportionalController>(cc, b);
  if (name == "aimd") return std::make_unique<AimdController>(cc, b, cfg.reward.latency_target_ms);
  if (name == "pid") return std::make_unique<PidController>(cc, b, cfg.reward.latency_target_ms, cfg.env.step_duration);
  throw ConfigError("unknown baseline '" + name + "'");
}

inline bool IsBaseline(const std::string& name) {
  return name == "fixed" || name == "fixed_untuned" || name == "cpu" || name == "aimd" || name == "pid";
}

/// Configuration for one traffic pattern, everything else unchanged.
inline ExperimentConfig WithPattern(ExperimentConfig cfg, TrafficKind kind) {
  cfg.pattern.kind = kind;
  return cfg;
}

/// Trained agents keyed by (pattern, ablation flags, seed) so experiments can
/// share training runs.
class AgentCache {
 public:
  using Observer = std::function<void(const ExperimentConfig&, std::uint64_t, const TrainResult&)>;

  explicit AgentCache(Observer on_train = {}) : on_train_(std::move(on_train)) {}

  const TrainResult& Get(const ExperimentConfig& cfg, std::uint64_t seed) {
    const Key key{static_cast<int>(cfg.pattern.kind), cfg.ablation.no_replay, cfg.ablation.no_target_net,
                  cfg.ablation.no_a3c, cfg.ablation.no_temporal, seed};
    auto it = runs_.find(key);
    if (it == runs_.end()) {
      it = runs_.emplace(key, std::make_unique<TrainResult>(Train(cfg, seed))).first;
      if (on_train_) on_train_(cfg, seed, *it->second);
    }
    return *it->second;
  }

  std::size_t size() const { return runs_.size(); }

 private:
  using Key = std::tuple<int, bool, bool, bool, bool, std::uint64_t>;
  std::map<Key, std::unique_ptr<TrainResult>> runs_;
  Observer on_train_;
};

/// Evaluates a named policy: a baseline, "hybrid" (trained with cfg), or
/// "simple_dqn" (trained with cfg but without the actor-critic).
inline EvalReport EvaluatePolicy(const std::string& policy, const ExperimentConfig& cfg, std::uint64_t seed,
                                 const ControllerConfig& tuned, AgentCache& cache,
                                 std::vector<TraceRow>* trace = nullptr) {
  if (IsBaseline(policy)) {
    auto c = MakeBaseline(policy, cfg, tuned);
    return Evaluate(*c, cfg, seed, trace);
  }
  if (policy == "hybrid") return EvaluateAgent(*cache.Get(cfg, seed).agent, cfg, seed, trace);
  if (policy == "simple_dqn") {
    ExperimentConfig d = cfg;
    d.ablation.no_a3c = true;
    const auto& agent = *cache.Get(d, seed).agent;
    SimpleDqnController c(agent.dqn().qnet(), NormalizationFor(d), d.env.bounds, d.ablation.no_temporal);
    return Evaluate(c, d, seed, trace);
  }
  throw ConfigError("unknown policy '" + policy + "'");
}

// ---------------------------------------------------------------------------
// Baseline tuning.

struct TuningRow {
  TrafficKind pattern = TrafficKind::kMixed;
  std::string controller;
  std::string params;  // "key=value;..." of the tuned parameters
  double score = 0.0;  // mean composite over tuning seeds
  double throughput = 0.0;
  double latency_p99 = 0.0;
  bool best = false;
};

struct TuningResult {
  std::map<TrafficKind, ControllerConfig> best;  // one config per pattern, all controllers
  std::vector<TuningRow> rows;
};

namespace detail {

struct Candidate {
  std::string params;
  ControllerConfig cfg;
};

inline std::vector<Candidate> TuningGrid(const std::string& controller, const ExperimentConfig& cfg) {
  std::vector<Candidate> out;
  const ControllerConfig base = cfg.baselines;
  auto fmt = [](double v) { return Format(v); };
  if (controller == "fixed") {
    for (int i = 0; i <= 24; ++i) {
      const double frac = 0.40 + 0.05 * i;  // 0.40 .. 1.60 of capacity
      ControllerConfig c = base;
      c.fixed_threshold = cfg.env.bounds.Clamp(frac * cfg.env.service_capacity);
      out.push_back({"fixed_threshold=" + fmt(c.fixed_threshold), c});
    }
  } else if (controller == "cpu") {
    for (double g : {0.1, 0.25, 0.5, 1.0}) {
      for (double sp : {0.6, 0.7, 0.8, 0.9}) {
        ControllerConfig c = base;
        c.cpu_gain = g;
        c.cpu_setpoint = sp;
        out.push_back({"cpu_gain=" + fmt(g) + ";cpu_setpoint=" + fmt(sp), c});
      }
    }
  } else if (controller == "aimd") {
    for (double inc : {25.0, 50.0, 100.0, 200.0, 400.0}) {
      for (double dec : {0.5, 0.7, 0.85, 0.95}) {
        ControllerConfig c = base;
        c.aimd_increase = inc;
        c.aimd_decrease = dec;
        out.push_back({"aimd_increase=" + fmt(inc) + ";aimd_decrease=" + fmt(dec), c});
      }
    }
  } else if (controller == "pid") {
    for (double kp : {0.5, 1.0, 2.0, 5.0, 10.0}) {
      for (double ki : {0.0, 0.05, 0.1, 0.5}) {
        ControllerConfig c = base;
        c.pid_kp = kp;
        c.pid_ki = ki;
        out.push_back({"pid_kp=" + fmt(kp) + ";pid_ki=" + fmt(ki), c});
      }
    }
  } else {
    throw ConfigError("no tuning grid for '" + controller + "'");
  }
  return out;
}

inline void CopyTuned(const std::string& controller, const ControllerConfig& from, ControllerConfig& to) {
  if (controller == "fixed") {
    to.fixed_threshold = from.fixed_threshold;
  } else if (controller == "cpu") {
    to.cpu_gain = from.cpu_gain;
    to.cpu_setpoint = from.cpu_setpoint;
  } else if (controller == "aimd") {
    to.aimd_increase = from.aimd_increase;
    to.aimd_decrease = from.aimd_decrease;
  } else if (controller == "pid") {
    to.pid_kp = from.pid_kp;
    to.pid_ki = from.pid_ki;
  }
}

}  // namespace detail

/// Grid-searches each baseline's parameters per pattern, scored by mean
/// composite over seeds offset by kTuningSeedOffset from cfg.seeds.
inline TuningResult TuneBaselines(const ExperimentConfig& cfg, const std::vector<TrafficKind>& patterns,
                                  const std::vector<std::string>& controllers = {"fixed", "cpu", "aimd", "pid"}) {
  TuningResult res;
  for (TrafficKind kind : patterns) {
    const ExperimentConfig pc = WithPattern(cfg, kind);
    ControllerConfig best_all = cfg.baselines;
    for (const auto& name : controllers) {
      std::size_t first = res.rows.size();
      std::size_t best_row = first;
      for (const auto& cand : detail::TuningGrid(name, pc)) {
        TuningRow row;
        row.pattern = kind;
        row.controller = name;
        row.params = cand.params;
        for (std::uint64_t seed : cfg.seeds) {
          auto c = MakeBaseline(name, pc, cand.cfg);
          const EvalReport r = Evaluate(*c, pc, seed + kTuningSeedOffset);
          row.score += r.composite;
          row.throughput += r.throughput;
          row.latency_p99 += r.latency_p99;
        }
        const auto n = static_cast<double>(cfg.seeds.size());
        row.score /= n;
        row.throughput /= n;
        row.latency_p99 /= n;
        res.rows.push_back(row);
        if (res.rows.size() - 1 == first || row.score > res.rows[best_row].score) {
          best_row = res.rows.size() - 1;
          detail::CopyTuned(name, cand.cfg, best_all);
        }
      }
      if (best_row < res.rows.size()) res.rows[best_row].best = true;
    }
    res.best[kind] = best_all;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Comparison.

struct CompareRow {
  TrafficKind pattern = TrafficKind::kMixed;
  std::string policy;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct CompareMean {
  TrafficKind pattern = TrafficKind::kMixed;
  std::string policy;
  double throughput = 0.0;
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
  double latency_p99 = 0.0;
  double availability = 0.0;
  double sla_compliance = 0.0;
  double composite = 0.0;
  // Percentage change relative to the "fixed" row of the same pattern.
  double throughput_delta_pct = 0.0;
  double p99_delta_pct = 0.0;
  double sla_delta_pct = 0.0;
};

struct CompareTable {
  std::vector<CompareRow> rows;
  std::vector<CompareMean> means;
};

inline double PercentDelta(double value, double reference) {
  if (reference == 0.0) return value == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), value);
  return 100.0 * (value - reference) / reference;
}

/// Evaluates every policy on every pattern and seed. `tuned` supplies
/// per-pattern baseline parameters; patterns missing from it use
/// cfg.baselines.
inline CompareTable Compare(const ExperimentConfig& cfg, const std::vector<std::string>& policies,
                            const std::vector<TrafficKind>& patterns,
                            const std::map<TrafficKind, ControllerConfig>& tuned, AgentCache& cache) {
  CompareTable table;
  for (TrafficKind kind : patterns) {
    const ExperimentConfig pc = WithPattern(cfg, kind);
    const auto t = tuned.find(kind);
    const ControllerConfig cc = t == tuned.end() ? cfg.baselines : t->second;
    std::vector<CompareMean> block;
    for (const auto& policy : policies) {
      CompareMean m;
      m.pattern = kind;
      m.policy = policy;
      for (std::uint64_t seed : cfg.seeds) {
        const EvalReport r = EvaluatePolicy(policy, pc, seed, cc, cache);
        table.rows.push_back({kind, policy, seed, r});
        m.throughput += r.throughput;
        m.latency_p50 += r.latency_p50;
        m.latency_p90 += r.latency_p90;
        m.latency_p99 += r.latency_p99;
        m.availability += r.availability;
        m.sla_compliance += r.sla_compliance;
        m.composite += r.composite;
      }
      const auto n = static_cast<double>(cfg.seeds.size());
      m.throughput /= n;
      m.latency_p50 /= n;
      m.latency_p90 /= n;
      m.latency_p99 /= n;
      m.availability /= n;
      m.sla_compliance /= n;
      m.composite /= n;
      block.push_back(m);
    }
    const CompareMean* ref = nullptr;
    for (const auto& m : block) {
      if (m.policy == "fixed") ref = &m;
    }
    for (auto& m : block) {
      if (ref) {
        m.throughput_delta_pct = PercentDelta(m.throughput, ref->throughput);
        m.p99_delta_pct = PercentDelta(m.latency_p99, ref->latency_p99);
        m.sla_delta_pct = PercentDelta(m.sla_compliance, ref->sla_compliance);
      }
      table.means.push_back(m);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Ablation.

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};

inline std::vector<AblationVariant> AblationVariants() {
  std::vector<AblationVariant> v(5);
  v[0].name = "full";
  v[1].name = "no_replay";
  v[1].flags.no_replay = true;
  v[2].name = "no_target_net";
  v[2].flags.no_target_net = true;
  v[3].name = "no_a3c";
  v[3].flags.no_a3c = true;
  v[4].name = "no_temporal";
  v[4].flags.no_temporal = true;
  return v;
}

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double composite = 0.0;
  double percent_of_full = 0.0;  // against the full model on the same seed
};

struct AblationSummary {
  std::string variant;
  double mean_composite = 0.0;
  double percent_of_full = 0.0;  // seed-averaged composite over full's
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::vector<AblationSummary> summary;
};

/// Percentage of `full` reached by `score`. Composite rewards can be
/// negative, so the ratio is taken against |full| around full itself:
/// equal scores give 100, lower scores give less than 100.
inline double PercentOfFull(double score, double full) {
  if (full == 0.0) return score == 0.0 ? 100.0 : (score > 0.0 ? 200.0 : 0.0);
  return 100.0 * (1.0 + (score - full) / std::abs(full));
}

/// Trains and evaluates each variant under cfg's seeds and pattern.
inline AblationTable Ablate(const ExperimentConfig& cfg, AgentCache& cache,
                            const std::vector<AblationVariant>& variants = AblationVariants()) {
  AblationTable table;
  std::map<std::uint64_t, double> full_by_seed;
  std::vector<std::vector<double>> scores(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    ExperimentConfig vc = cfg;
    vc.ablation = variants[v].flags;
    for (std::uint64_t seed : cfg.seeds) {
      scores[v].push_back(EvaluateAgent(*cache.Get(vc, seed).agent, vc, seed).composite);
    }
  }
  // The full model is the variant without flags.
  std::size_t full = 0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    if (variants[v].flags == AblationFlags{}) full = v;
  }
  double full_mean = 0.0;
  for (double s : scores[full]) full_mean += s;
  full_mean /= static_cast<double>(cfg.seeds.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    double mean = 0.0;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      table.rows.push_back({variants[v].name, cfg.seeds[i], scores[v][i], PercentOfFull(scores[v][i], scores[full][i])});
      mean += scores[v][i];
    }
    mean /= static_cast<double>(cfg.seeds.size());
    table.summary.push_back({variants[v].name, mean, PercentOfFull(mean, full_mean)});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Decision latency.

/// Mean wall-clock milliseconds of one full fused decision (encode, both
/// forward passes, fusion, threshold update) over `calls` calls.
inline double MeasureDecisionLatencyMs(const HybridAgent& agent, const ExperimentConfig& cfg, int calls = 1000) {
  AgentController c(agent, NormalizationFor(cfg), cfg.env.bounds, cfg.ablation.no_temporal, EvalMode::kFused, 7);
  EnvConfig ec = cfg.env;
  RateLimitEnv env(ec, cfg.pattern, cfg.reward);
  std::vector<SystemState> probes;
  for (int i = 0; i < 16; ++i) {
    probes.push_back(env.state().state);
    env.StepThreshold(env.state().state.threshold);
  }
  double sink = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < calls; ++i) sink += c.Decide(probes[static_cast<std::size_t>(i) % probes.size()]);
  const auto stop = std::chrono::steady_clock::now();
  if (!std::isfinite(sink)) throw DomainError("decision produced a non-finite threshold");
  return std::chrono::duration<double, std::milli>(stop - start).count() / calls;
}

}  // namespace ratelab
