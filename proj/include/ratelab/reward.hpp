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

#include <cmath>
#include <cstdint>

#include "ratelab/common.hpp"

namespace ratelab {

/// Weights and shape parameters of the per-step reward
///   r = w1 * throughput + w2 * latency + w3 * stability.
struct RewardConfig {
  double w1 = 0.5;
  double w2 = 0.4;
  double w3 = 0.1;
  double latency_target_ms = 500.0;
  // Per-millisecond decay of the latency reward past the target.
  double latency_decay = 0.01;
  double gamma = 0.99;

  void Validate() const {
    Expects(std::abs(w1 + w2 + w3 - 1.0) <= 1e-9, "RewardConfig: weights must sum to 1");
    Expects(latency_decay > 0.0, "RewardConfig: latency_decay must be positive");
    Expects(gamma > 0.0 && gamma < 1.0, "RewardConfig: gamma must lie in (0,1)");
    Expects(latency_target_ms > 0.0, "RewardConfig: latency target must be positive");
  }
};

/// Fraction of requests that completed successfully; 0 when nothing arrived.
inline double ThroughputReward(std::int64_t n_success, std::int64_t n_total) {
  Expects(n_success >= 0 && n_success <= n_total, "ThroughputReward: need 0 <= n_success <= n_total");
  if (n_total == 0) return 0.0;
  return static_cast<double>(n_success) / static_cast<double>(n_total);
}

inline double LatencyReward(double latency_ms, const RewardConfig& cfg) {
  Expects(latency_ms >= 0.0, "LatencyReward: latency must be non-negative");
  if (latency_ms <= cfg.latency_target_ms) return 1.0;
  return std::exp(-cfg.latency_decay * (latency_ms - cfg.latency_target_ms));
}

/// Relative threshold change, negated. Callers pass the threshold actually
/// applied, i.e. after clamping.
inline double StabilityReward(double theta_prev, double theta_next) {
  if (!(theta_prev > 0.0)) throw DomainError("StabilityReward: previous threshold must be positive");
  return -std::abs(theta_next - theta_prev) / theta_prev;
}

inline double TotalReward(double r_throughput, double r_latency, double r_stability, const RewardConfig& cfg) {
  return cfg.w1 * r_throughput + cfg.w2 * r_latency + cfg.w3 * r_stability;
}

}  // namespace ratelab
