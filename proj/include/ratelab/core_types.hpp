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

// Observable service state, the discrete threshold-adjustment action set and
// the preprocessing that turns raw metrics into a network input vector.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "ratelab/common.hpp"

namespace ratelab {

/// Width of the encoded state: seven scalar metrics plus the sin/cos pair of
/// the time-of-day encoding.
inline constexpr std::size_t kStateWidth = 9;
inline constexpr std::size_t kNumActions = 7;

/// Threshold changes, relative to the current threshold, in action-index order.
inline constexpr std::array<double, kNumActions> kActionMultipliers = {
    -0.50, -0.20, -0.10, 0.0, +0.10, +0.20, +0.50};

inline constexpr int kNoChangeAction = 3;

struct SystemState {
  double request_rate = 0.0;    // offered requests/second
  double cpu_util = 0.0;        // [0,1]
  double mem_util = 0.0;        // [0,1]
  double threshold = 0.0;       // admitted requests/second cap
  double avg_latency_ms = 0.0;  // mean latency of served requests
  double queue_len = 0.0;       // requests waiting
  double error_rate = 0.0;      // [0,1]
  std::array<double, 2> temporal = {0.0, 1.0};
  std::int64_t step = 0;
};

/// One of the seven threshold adjustments.
class Action {
 public:
  constexpr Action() = default;

  static Action FromIndex(int index) {
    Expects(index >= 0 && index < static_cast<int>(kNumActions), "Action index out of range");
    return Action(index);
  }

  /// Exact lookup; returns nothing for a multiplier outside the action set.
  static std::optional<Action> FromMultiplier(double multiplier) {
    for (std::size_t i = 0; i < kNumActions; ++i) {
      if (kActionMultipliers[i] == multiplier) return Action(static_cast<int>(i));
    }
    return std::nullopt;
  }

  constexpr int index() const { return index_; }
  constexpr double multiplier() const { return kActionMultipliers[static_cast<std::size_t>(index_)]; }

  friend constexpr bool operator==(Action, Action) = default;

 private:
  constexpr explicit Action(int index) : index_(index) {}
  int index_ = kNoChangeAction;
};

struct ThresholdBounds {
  double min = 100.0;
  double max = 20000.0;

  void Validate() const {
    Expects(min > 0.0 && min < max, "ThresholdBounds: require 0 < min < max");
  }
  double Clamp(double theta) const { return std::clamp(theta, min, max); }
  bool Contains(double theta) const { return theta >= min && theta <= max; }
  double Midpoint() const { return 0.5 * (min + max); }
};

struct FeatureRange {
  double min = 0.0;
  double max = 1.0;
};

/// Min-max scaling bounds for the unbounded metrics, plus the decay used when
/// smoothing noisy metrics.
struct NormalizationSpec {
  FeatureRange request_rate{0.0, 40000.0};
  FeatureRange threshold{100.0, 20000.0};
  FeatureRange latency_ms{0.0, 2000.0};
  FeatureRange queue_len{0.0, 50000.0};
  double ewma_beta = 0.9;

  /// Bounds tied to the experiment: rates up to twice the largest threshold,
  /// latency up to four latency targets, queue up to its capacity.
  static NormalizationSpec ForExperiment(const ThresholdBounds& bounds, double latency_target_ms,
                                         double queue_capacity) {
    NormalizationSpec spec;
    spec.request_rate = {0.0, 2.0 * bounds.max};
    spec.threshold = {bounds.min, bounds.max};
    spec.latency_ms = {0.0, 4.0 * latency_target_ms};
    spec.queue_len = {0.0, queue_capacity};
    return spec;
  }

  void Validate() const {
    for (const FeatureRange* r : {&request_rate, &threshold, &latency_ms, &queue_len}) {
      Expects(r->min < r->max, "NormalizationSpec: every feature needs min < max");
    }
    Expects(ewma_beta >= 0.0 && ewma_beta < 1.0, "NormalizationSpec: ewma_beta must lie in [0,1)");
  }
};

/// Maps an hour of day onto the unit circle so that 23:59 and 00:00 are
/// neighbours.
inline std::array<double, 2> TemporalFeatures(double hour_of_day) {
  if (!(hour_of_day >= 0.0 && hour_of_day < 24.0)) {
    throw DomainError("TemporalFeatures: hour must lie in [0,24)");
  }
  const double angle = 2.0 * std::numbers::pi * hour_of_day / 24.0;
  return {std::sin(angle), std::cos(angle)};
}

inline double EwmaSmooth(double prev, double current, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("EwmaSmooth: beta must lie in [0,1)");
  return beta * prev + (1.0 - beta) * current;
}

inline double MinMaxScale(double value, const FeatureRange& range) {
  return std::clamp((value - range.min) / (range.max - range.min), 0.0, 1.0);
}

/// Encodes a raw state as
/// [rate, cpu, mem, threshold, latency, queue, errors, sin(hour), cos(hour)].
/// Scaled features clip to [0,1]; nothing here throws on out-of-range data.
inline std::array<double, kStateWidth> EncodeState(const SystemState& raw, const NormalizationSpec& spec) {
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {MinMaxScale(raw.request_rate, spec.request_rate),
          unit(raw.cpu_util),
          unit(raw.mem_util),
          MinMaxScale(raw.threshold, spec.threshold),
          MinMaxScale(raw.avg_latency_ms, spec.latency_ms),
          MinMaxScale(raw.queue_len, spec.queue_len),
          unit(raw.error_rate),
          std::clamp(raw.temporal[0], -1.0, 1.0),
          std::clamp(raw.temporal[1], -1.0, 1.0)};
}

/// Applies a percentage change and clamps to the threshold range.
inline double ApplyAction(double theta, Action action, const ThresholdBounds& bounds) {
  return bounds.Clamp(theta * (1.0 + action.multiplier()));
}

}  // namespace ratelab
