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

// Classic threshold controllers used as comparison points. Every controller
// maps the observed state to the next threshold and always stays inside the
// threshold bounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "ratelab/core_types.hpp"
#include "ratelab/neural.hpp"

namespace ratelab {

struct ControllerConfig {
  double fixed_threshold = 0.0;  // <= 0 means "use the service capacity"
  double cpu_gain = 0.5;
  double cpu_setpoint = 0.7;
  double aimd_increase = 50.0;   // req/s added per uncongested step
  double aimd_decrease = 0.5;    // multiplicative factor on congestion
  double aimd_error_threshold = 0.01;
  double pid_kp = 1.0;           // req/s per ms of latency error
  double pid_ki = 0.1;
  double pid_kd = 0.05;
  double pid_integral_limit = 50000.0;  // |sum e dt| clamp, ms*s

  void Validate() const {
    Expects(aimd_decrease > 0.0 && aimd_decrease < 1.0, "ControllerConfig: aimd_decrease must lie in (0,1)");
    Expects(std::isfinite(cpu_gain) && std::isfinite(pid_kp) && std::isfinite(pid_ki) && std::isfinite(pid_kd),
            "ControllerConfig: gains must be finite");
    Expects(pid_integral_limit >= 0.0, "ControllerConfig: integral limit must be non-negative");
  }
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Next threshold for the observed state.
  virtual double Decide(const SystemState& state) = 0;
  virtual void Reset() {}
};

inline double FixedThresholdDecide(const ControllerConfig& cfg, const ThresholdBounds& bounds) {
  return bounds.Clamp(cfg.fixed_threshold);
}

inline double CpuProportionalDecide(const SystemState& state, const ControllerConfig& cfg,
                                    const ThresholdBounds& bounds) {
  return bounds.Clamp(state.threshold * (1.0 + cfg.cpu_gain * (cfg.cpu_setpoint - state.cpu_util)));
}

/// Congested when mean latency exceeds the target or errors exceed the
/// configured rate.
inline bool AimdCongested(const SystemState& state, const ControllerConfig& cfg, double latency_target_ms) {
  return state.avg_latency_ms > latency_target_ms || state.error_rate > cfg.aimd_error_threshold;
}

inline double AimdDecide(const SystemState& state, bool congested, const ControllerConfig& cfg,
                         const ThresholdBounds& bounds) {
  return bounds.Clamp(congested ? state.threshold * cfg.aimd_decrease : state.threshold + cfg.aimd_increase);
}

struct PidMemory {
  double integral = 0.0;  // sum of error * dt, clamped
  double prev_error = 0.0;
  bool primed = false;
};

/// PID on latency error e = target - latency, added to the current
/// threshold. The integral term is clamped (anti-windup) and the derivative
/// is zero on the first call.
inline double PidDecide(const SystemState& state, PidMemory& mem, const ControllerConfig& cfg,
                        const ThresholdBounds& bounds, double latency_target_ms, double dt) {
  const double e = latency_target_ms - state.avg_latency_ms;
  mem.integral = std::clamp(mem.integral + e * dt, -cfg.pid_integral_limit, cfg.pid_integral_limit);
  const double de = mem.primed ? (e - mem.prev_error) / dt : 0.0;
  mem.prev_error = e;
  mem.primed = true;
  const double u = cfg.pid_kp * e + cfg.pid_ki * mem.integral + cfg.pid_kd * de;
  return bounds.Clamp(state.threshold + u);
}

class FixedThresholdController : public Controller {
 public:
  FixedThresholdController(ControllerConfig cfg, ThresholdBounds bounds) : cfg_(cfg), bounds_(bounds) {}
  std::string name() const override { return "fixed"; }
  double Decide(const SystemState&) override { return FixedThresholdDecide(cfg_, bounds_); }

 private:
  ControllerConfig cfg_;
  ThresholdBounds bounds_;
};

class CpuProportionalController : public Controller {
 public:
  CpuProportionalController(ControllerConfig cfg, ThresholdBounds bounds) : cfg_(cfg), bounds_(bounds) {}
  std::string name() const override { return "cpu"; }
  double Decide(const SystemState& s) override { return CpuProportionalDecide(s, cfg_, bounds_); }

 private:
  ControllerConfig cfg_;
  ThresholdBounds bounds_;
};

class AimdController : public Controller {
 public:
  AimdController(ControllerConfig cfg, ThresholdBounds bounds, double latency_target_ms)
      : cfg_(cfg), bounds_(bounds), target_(latency_target_ms) {}
  std::string name() const override { return "aimd"; }
  double Decide(const SystemState& s) override {
    return AimdDecide(s, AimdCongested(s, cfg_, target_), cfg_, bounds_);
  }

 private:
  ControllerConfig cfg_;
  ThresholdBounds bounds_;
  double target_;
};

class PidController : public Controller {
 public:
  PidController(ControllerConfig cfg, ThresholdBounds bounds, double latency_target_ms, double dt)
      : cfg_(cfg), bounds_(bounds), target_(latency_target_ms), dt_(dt) {}
  std::string name() const override { return "pid"; }
  double Decide(const SystemState& s) override { return PidDecide(s, mem_, cfg_, bounds_, target_, dt_); }
  void Reset() override { mem_ = {}; }
  const PidMemory& memory() const { return mem_; }

 private:
  ControllerConfig cfg_;
  ThresholdBounds bounds_;
  double target_;
  double dt_;
  PidMemory mem_;
};

/// Greedy Q-network acting through the seven threshold multipliers.
class SimpleDqnController : public Controller {
 public:
  SimpleDqnController(Mlp qnet, NormalizationSpec norm, ThresholdBounds bounds, bool zero_temporal = false)
      : qnet_(std::move(qnet)), norm_(norm), bounds_(bounds), zero_temporal_(zero_temporal) {
    Expects(qnet_.input_width() == static_cast<int>(kStateWidth) && qnet_.output_width() == static_cast<int>(kNumActions),
            "SimpleDqnController: network must map the state width to the seven actions");
  }
  std::string name() const override { return "simple_dqn"; }

  int GreedyAction(const SystemState& s) const {
    auto enc = EncodeState(s, norm_);
    if (zero_temporal_) enc[7] = enc[8] = 0.0;
    return Argmax(qnet_.Forward(Vector(Eigen::Map<const Vector>(enc.data(), kStateWidth))));
  }

  double Decide(const SystemState& s) override {
    return ApplyAction(s.threshold, Action::FromIndex(GreedyAction(s)), bounds_);
  }

 private:
  Mlp qnet_;
  NormalizationSpec norm_;
  ThresholdBounds bounds_;
  bool zero_temporal_;
};

}  // namespace ratelab
