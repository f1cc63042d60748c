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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ratelab/common.hpp"
#include "ratelab/env_sim.hpp"

namespace ratelab {

/// Nearest-rank percentile: the element at rank ceil(p * N) of the sorted
/// samples (rank clamped to [1, N]).
inline double Percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw DomainError("Percentile: no samples");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Percentile: p must lie in [0,1]");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  // The epsilon absorbs representation error in p * N (0.99 * 100 -> 99).
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

/// Nearest-rank percentile over samples that each stand for `weight`
/// requests: the smallest value whose cumulative weight reaches p * total.
inline double WeightedPercentile(std::vector<LatencySample> samples, double p) {
  double total = 0.0;
  for (const auto& s : samples) total += s.weight;
  if (samples.empty() || total <= 0.0) throw DomainError("WeightedPercentile: no samples");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("WeightedPercentile: p must lie in [0,1]");
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.ms < b.ms; });
  const double goal = p * total * (1.0 - 1e-12);
  double acc = 0.0;
  for (const auto& s : samples) {
    acc += s.weight;
    if (acc >= goal && s.weight > 0.0) return s.ms;
  }
  return samples.back().ms;
}

/// Limits from the constrained formulation; measured and reported only.
struct EvalConstraints {
  double latency_max_ms = 1000.0;  // tau_max
  double latency_violation = 0.01; // delta_latency: allowed P(latency > tau_max)
  double error_budget = 0.01;      // delta_error: allowed mean error rate
  double resource_max = 0.9;       // rho_max: allowed max(cpu, mem)

  void Validate() const {
    Expects(latency_max_ms > 0.0 && resource_max > 0.0, "EvalConstraints: limits must be positive");
    Expects(latency_violation > 0.0 && latency_violation < 1.0 && error_budget > 0.0 && error_budget < 1.0,
            "EvalConstraints: violation budgets must lie in (0,1)");
  }
};

struct EvalReport {
  double throughput = 0.0;  // successful requests per second
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
  double latency_p99 = 0.0;
  double availability = 0.0;    // completed / offered
  double sla_compliance = 0.0;  // served requests within the latency target
  double mean_cpu = 0.0;
  double mean_mem = 0.0;
  double mean_threshold = 0.0;
  double mean_reward = 0.0;     // per step
  double composite = 0.0;       // mean reward per episode-length window
  // Constraint monitoring.
  double latency_over_max_fraction = 0.0;  // of served requests
  double mean_error_rate = 0.0;
  double resource_over_fraction = 0.0;     // of steps
  double threshold_out_of_range_fraction = 0.0;
  bool latency_constraint_ok = true;
  bool error_constraint_ok = true;
  bool resource_constraint_ok = true;
  std::int64_t steps = 0;
  std::int64_t offered = 0;
  std::int64_t completed = 0;
  bool degenerate = false;  // no traffic offered during the run
};

}  // namespace ratelab
