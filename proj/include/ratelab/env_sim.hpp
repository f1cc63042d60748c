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

// Discrete-time model of a single rate-limited service.
//
// Each step covers `step_duration` simulated seconds. Offered traffic comes
// from a TrafficGenerator; at most `threshold * step_duration` requests are
// admitted and the rest are rejected. The backend completes up to
// `capacity * step_duration` requests per step, serving the FIFO backlog
// before new arrivals. Admitted requests that neither complete nor fit into
// the queue become errors. Served latency follows an M/M/1-style congestion
// curve base / (1 - min(rho, 0.99)) plus the time needed to drain the
// backlog, with multiplicative log-normal spread.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ratelab/common.hpp"
#include "ratelab/core_types.hpp"

namespace ratelab {

enum class TrafficKind { kPeriodic, kBurst, kMixed };

inline std::string_view ToString(TrafficKind kind) {
  switch (kind) {
    case TrafficKind::kPeriodic: return "periodic";
    case TrafficKind::kBurst: return "burst";
    case TrafficKind::kMixed: return "mixed";
  }
  return "?";
}

inline TrafficKind ParseTrafficKind(std::string_view name) {
  if (name == "periodic") return TrafficKind::kPeriodic;
  if (name == "burst") return TrafficKind::kBurst;
  if (name == "mixed") return TrafficKind::kMixed;
  throw std::invalid_argument("unknown traffic kind: " + std::string(name));
}

struct TrafficPattern {
  TrafficKind kind = TrafficKind::kMixed;
  double base_rate = 9000.0;      // req/s; mean of the daily cycle
  double peak_to_valley = 5.0;    // max/min of the daily cycle
  double burst_min_duration = 30.0;
  double burst_max_duration = 120.0;
  double burst_magnitude = 3.0;   // burst adds magnitude * base_rate
  double burst_mean_interval = 600.0;  // mean seconds between bursts; inf disables
  double noise_std = -1.0;        // req/s; negative means 5% of base_rate
  double day_length = 86400.0;    // seconds before time compression

  double NoiseStd() const { return noise_std < 0.0 ? 0.05 * base_rate : noise_std; }

  void Validate() const {
    Expects(base_rate > 0.0, "TrafficPattern: base_rate must be positive");
    Expects(peak_to_valley >= 1.0, "TrafficPattern: peak_to_valley must be >= 1");
    Expects(burst_min_duration > 0.0 && burst_min_duration <= burst_max_duration,
            "TrafficPattern: need 0 < burst_min_duration <= burst_max_duration");
    Expects(burst_magnitude >= 0.0, "TrafficPattern: burst_magnitude must be non-negative");
    Expects(burst_mean_interval > 0.0, "TrafficPattern: burst_mean_interval must be positive");
    Expects(day_length > 0.0, "TrafficPattern: day_length must be positive");
  }
};

struct EnvConfig {
  double service_capacity = 12000.0;  // req/s the backend completes
  double queue_capacity = 50000.0;    // requests
  double base_latency_ms = 50.0;
  double step_duration = 10.0;        // simulated seconds per decision
  double time_compression = 60.0;     // simulated day = day_length / compression
  std::uint64_t seed = 1;
  ThresholdBounds bounds;
  // Threshold changes closer together than this are suppressed.
  double min_change_interval = 30.0;
  // Stationary std-dev of log capacity (slow Ornstein-Uhlenbeck drift); 0
  // keeps the backend at exactly service_capacity.
  double capacity_variation = 0.0;
  double capacity_correlation_time = 600.0;
  double latency_spread = 0.25;       // log-normal sigma of per-request latency
  int latency_samples = 32;           // weighted samples drawn per step
  double cpu_noise = 0.02;
  double smoothing_beta = 0.9;        // EWMA decay for memory tracking CPU

  double SimulatedDay(const TrafficPattern& pattern) const { return pattern.day_length / time_compression; }

  void Validate() const {
    Expects(service_capacity > 0.0, "EnvConfig: service_capacity must be positive");
    Expects(queue_capacity > 0.0, "EnvConfig: queue_capacity must be positive");
    Expects(base_latency_ms > 0.0, "EnvConfig: base_latency_ms must be positive");
    Expects(step_duration > 0.0, "EnvConfig: step_duration must be positive");
    Expects(time_compression >= 1.0, "EnvConfig: time_compression must be >= 1");
    Expects(min_change_interval >= 0.0, "EnvConfig: min_change_interval must be non-negative");
    Expects(capacity_variation >= 0.0, "EnvConfig: capacity_variation must be non-negative");
    Expects(capacity_correlation_time > 0.0, "EnvConfig: capacity_correlation_time must be positive");
    Expects(latency_spread >= 0.0, "EnvConfig: latency_spread must be non-negative");
    Expects(latency_samples >= 1, "EnvConfig: latency_samples must be >= 1");
    Expects(smoothing_beta >= 0.0 && smoothing_beta < 1.0, "EnvConfig: smoothing_beta must lie in [0,1)");
    bounds.Validate();
  }
};

/// Renewal process of non-overlapping burst windows: gaps are exponential
/// with the configured mean, durations uniform in [min, max].
class BurstProcess {
 public:
  BurstProcess() = default;
  BurstProcess(double mean_interval, double min_duration, double max_duration)
      : mean_interval_(mean_interval), min_duration_(min_duration), max_duration_(max_duration) {}

  /// Queries must be made with non-decreasing times.
  bool Active(double t, Rng& rng) {
    if (!std::isfinite(mean_interval_)) return false;
    while (t >= end_) ScheduleNext(rng);
    return t >= start_;
  }

  double window_start() const { return start_; }
  double window_end() const { return end_; }

  friend bool operator==(const BurstProcess&, const BurstProcess&) = default;

 private:
  void ScheduleNext(Rng& rng) {
    const double gap = -mean_interval_ * std::log1p(-Uniform01(rng));
    start_ = end_ + gap;
    end_ = start_ + min_duration_ + (max_duration_ - min_duration_) * Uniform01(rng);
  }

  double mean_interval_ = std::numeric_limits<double>::infinity();
  double min_duration_ = 0.0;
  double max_duration_ = 0.0;
  double start_ = 0.0;
  double end_ = 0.0;
};

/// Offered load for one traffic pattern.
class TrafficGenerator {
 public:
  TrafficGenerator() = default;
  TrafficGenerator(const TrafficPattern& pattern, double period_seconds)
      : pattern_(pattern),
        period_(period_seconds),
        bursts_(pattern.burst_mean_interval, pattern.burst_min_duration, pattern.burst_max_duration) {
    pattern.Validate();
    Expects(period_seconds > 0.0, "TrafficGenerator: period must be positive");
  }

  /// Daily-cycle amplitude that makes max/min equal the peak-to-valley ratio.
  double Amplitude() const { return (pattern_.peak_to_valley - 1.0) / (pattern_.peak_to_valley + 1.0); }

  double PeriodicRate(double t) const {
    return pattern_.base_rate * (1.0 + Amplitude() * std::sin(2.0 * std::numbers::pi * t / period_));
  }

  bool BurstActive(double t, Rng& rng) { return bursts_.Active(t, rng); }

  /// Instantaneous rate at time t without noise.
  double DeterministicRate(double t, Rng& rng) {
    const double burst = pattern_.burst_magnitude * pattern_.base_rate;
    switch (pattern_.kind) {
      case TrafficKind::kPeriodic:
        return PeriodicRate(t);
      case TrafficKind::kBurst:
        return pattern_.base_rate + (BurstActive(t, rng) ? burst : 0.0);
      case TrafficKind::kMixed:
        return PeriodicRate(t) + (BurstActive(t, rng) ? burst : 0.0);
    }
    return 0.0;
  }

  /// Offered rate at time t; only mixed traffic carries Gaussian noise.
  /// Never negative.
  double Rate(double t, Rng& rng) {
    Expects(t >= 0.0, "TrafficGenerator::Rate: time must be non-negative");
    double rate = DeterministicRate(t, rng);
    if (pattern_.kind == TrafficKind::kMixed) rate += Noise(rng);
    return std::max(0.0, rate);
  }

  /// Mean offered rate over [t0, t0 + dt), integrating the deterministic part
  /// at one-second resolution and adding a single noise draw.
  double MeanRate(double t0, double dt, Rng& rng) {
    const int n = std::max(1, static_cast<int>(std::lround(dt)));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += DeterministicRate(t0 + (i + 0.5) * dt / n, rng);
    double rate = sum / n;
    if (pattern_.kind == TrafficKind::kMixed) rate += Noise(rng);
    return std::max(0.0, rate);
  }

  const TrafficPattern& pattern() const { return pattern_; }
  double period() const { return period_; }

  friend bool operator==(const TrafficGenerator& a, const TrafficGenerator& b) {
    return a.period_ == b.period_ && a.bursts_ == b.bursts_;
  }

 private:
  double Noise(Rng& rng) const {
    const double sd = pattern_.NoiseStd();
    if (sd <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sd)(rng);
  }

  TrafficPattern pattern_;
  double period_ = 86400.0;
  BurstProcess bursts_;
};

struct LatencySample {
  double ms = 0.0;
  double weight = 0.0;  // number of served requests this sample stands for
};

struct StepOutcome {
  std::int64_t n_offered = 0;
  std::int64_t n_admitted = 0;
  std::int64_t n_success = 0;   // admitted this step and completed this step
  std::int64_t n_dequeued = 0;  // completed from the backlog of earlier steps
  std::int64_t n_enqueued = 0;  // admitted this step, carried over in the queue
  std::int64_t n_rejected = 0;
  std::int64_t n_errors = 0;    // admitted but dropped on queue overflow
  std::vector<LatencySample> latency_samples;
  double utilization = 0.0;     // (admitted + backlog) / step capacity
  double capacity = 0.0;        // backend req/s during this step
  double model_latency_ms = 0.0;
  SystemState next_state;

  std::int64_t n_completed() const { return n_success + n_dequeued; }

  /// Weighted mean of the served latency samples; 0 when nothing was served.
  double MeanLatency() const {
    double w = 0.0, s = 0.0;
    for (const auto& l : latency_samples) {
      w += l.weight;
      s += l.weight * l.ms;
    }
    return w > 0.0 ? s / w : 0.0;
  }
};

struct EnvState {
  SystemState state;
  std::int64_t queue = 0;
  double offered_rate = 0.0;
  double sim_time = 0.0;
  double log_capacity = 0.0;  // OU deviation of log capacity
  TrafficGenerator traffic;
  Rng rng;

  friend bool operator==(const EnvState& a, const EnvState& b) {
    const auto& s = a.state;
    const auto& t = b.state;
    return s.request_rate == t.request_rate && s.cpu_util == t.cpu_util && s.mem_util == t.mem_util &&
           s.threshold == t.threshold && s.avg_latency_ms == t.avg_latency_ms && s.queue_len == t.queue_len &&
           s.error_rate == t.error_rate && s.temporal == t.temporal && s.step == t.step && a.queue == b.queue &&
           a.offered_rate == b.offered_rate && a.sim_time == b.sim_time && a.log_capacity == b.log_capacity &&
           a.traffic == b.traffic && a.rng == b.rng;
  }
};

inline std::array<double, 2> TemporalAt(double sim_time, double period) {
  double phase = std::fmod(sim_time, period) / period;
  if (phase < 0.0) phase += 1.0;
  double hour = 24.0 * phase;
  if (hour >= 24.0) hour = 0.0;
  return TemporalFeatures(hour);
}

/// Initial state: empty queue, threshold at the midpoint of its bounds,
/// time zero. `stream` selects an independent random stream (episode or
/// worker); equal (seed, stream) give bit-identical states.
inline EnvState Reset(const EnvConfig& cfg, const TrafficPattern& pattern, std::uint64_t stream = 0) {
  cfg.Validate();
  EnvState env;
  env.rng = MakeRng(cfg.seed, {stream});
  env.traffic = TrafficGenerator(pattern, cfg.SimulatedDay(pattern));
  env.state.threshold = cfg.bounds.Midpoint();
  env.state.cpu_util = 0.1;
  env.state.mem_util = 0.1;
  env.state.temporal = TemporalAt(0.0, env.traffic.period());
  return env;
}

/// Advances the simulator by one decision step with threshold `theta`.
inline StepOutcome Step(EnvState& env, const EnvConfig& cfg, double theta) {
  if (!cfg.bounds.Contains(theta)) throw ContractViolation("Step: threshold outside bounds");
  const double dt = cfg.step_duration;

  // Slow capacity drift.
  if (cfg.capacity_variation > 0.0) {
    const double decay = std::exp(-dt / cfg.capacity_correlation_time);
    const double shock = std::normal_distribution<double>(0.0, 1.0)(env.rng);
    env.log_capacity = decay * env.log_capacity + cfg.capacity_variation * std::sqrt(1.0 - decay * decay) * shock;
    env.log_capacity = std::clamp(env.log_capacity, -3.0 * cfg.capacity_variation, 3.0 * cfg.capacity_variation);
  }
  const double capacity = cfg.service_capacity * std::exp(env.log_capacity);

  StepOutcome out;
  out.capacity = capacity;
  env.offered_rate = env.traffic.MeanRate(env.sim_time, dt, env.rng);
  out.n_offered = std::llround(env.offered_rate * dt);
  const auto admit_cap = static_cast<std::int64_t>(std::llround(theta * dt));
  out.n_admitted = std::min(out.n_offered, admit_cap);
  out.n_rejected = out.n_offered - out.n_admitted;

  const auto step_capacity = static_cast<std::int64_t>(std::floor(capacity * dt));
  const std::int64_t backlog = env.queue;
  out.n_dequeued = std::min(backlog, step_capacity);
  out.n_success = std::min(out.n_admitted, step_capacity - out.n_dequeued);
  const std::int64_t leftover = out.n_admitted - out.n_success;
  const auto queue_limit = static_cast<std::int64_t>(cfg.queue_capacity);
  const std::int64_t space = queue_limit - (backlog - out.n_dequeued);
  out.n_enqueued = std::clamp<std::int64_t>(leftover, 0, std::max<std::int64_t>(space, 0));
  out.n_errors = leftover - out.n_enqueued;
  env.queue = backlog - out.n_dequeued + out.n_enqueued;

  const double rho = static_cast<double>(out.n_admitted + backlog) / (capacity * dt);
  out.utilization = rho;
  const double queue_wait_ms = static_cast<double>(backlog) / capacity * 1000.0;
  out.model_latency_ms = cfg.base_latency_ms / (1.0 - std::min(rho, 0.99)) + queue_wait_ms;

  const std::int64_t served = out.n_completed();
  if (served > 0) {
    const int k = cfg.latency_samples;
    const double sigma = cfg.latency_spread;
    std::normal_distribution<double> z(0.0, 1.0);
    out.latency_samples.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      // Mean-preserving log-normal spread around the model latency.
      const double factor = sigma > 0.0 ? std::exp(sigma * z(env.rng) - 0.5 * sigma * sigma) : 1.0;
      out.latency_samples.push_back({out.model_latency_ms * factor, static_cast<double>(served) / k});
    }
  }

  double cpu = 0.1 + 0.85 * std::min(rho, 1.0);
  if (cfg.cpu_noise > 0.0) cpu += std::normal_distribution<double>(0.0, cfg.cpu_noise)(env.rng);
  cpu = std::clamp(cpu, 0.0, 1.0);

  env.sim_time += dt;
  SystemState next;
  next.request_rate = static_cast<double>(out.n_offered) / dt;
  next.cpu_util = cpu;
  next.mem_util = std::clamp(EwmaSmooth(env.state.mem_util, cpu, cfg.smoothing_beta), 0.0, 1.0);
  next.threshold = theta;
  next.avg_latency_ms = out.MeanLatency();
  next.queue_len = static_cast<double>(env.queue);
  next.error_rate = static_cast<double>(out.n_errors) / static_cast<double>(std::max<std::int64_t>(1, out.n_admitted));
  next.temporal = TemporalAt(env.sim_time, env.traffic.period());
  next.step = env.state.step + 1;
  env.state = next;
  out.next_state = next;
  return out;
}

}  // namespace ratelab
