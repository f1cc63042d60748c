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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ratelab/env_sim.hpp"
#include "ratelab/environment.hpp"

namespace ratelab {
namespace {

TrafficPattern Pattern(TrafficKind kind) {
  TrafficPattern p;
  p.kind = kind;
  return p;
}

EnvConfig QuietConfig() {
  EnvConfig c;
  c.cpu_noise = 0.0;
  c.latency_spread = 0.0;
  return c;
}

TEST(Traffic, PeriodicPeakIsFiveTimesValley) {
  TrafficGenerator g(Pattern(TrafficKind::kPeriodic), 1440.0);
  EXPECT_NEAR(g.PeriodicRate(1440.0 / 4) / g.PeriodicRate(3 * 1440.0 / 4), 5.0, 1e-12);
}

TEST(Traffic, PeriodicMaxOverMinWithinOnePercent) {
  TrafficPattern p = Pattern(TrafficKind::kPeriodic);
  Rng rng = MakeRng(1, {});
  TrafficGenerator g(p, 1440.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double t = 0.0; t < 1440.0; t += 1.0) {
    const double r = g.Rate(t, rng);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_NEAR(hi / lo, 5.0, 0.05);
}

TEST(Traffic, BurstOutsideWindowIsBaseRate) {
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  TrafficGenerator g(p, 1440.0);
  Rng rng = MakeRng(2, {});
  BurstProcess oracle(p.burst_mean_interval, p.burst_min_duration, p.burst_max_duration);
  Rng oracle_rng = MakeRng(2, {});
  int quiet = 0, loud = 0;
  for (double t = 0.0; t < 20000.0; t += 5.0) {
    const double r = g.Rate(t, rng);
    if (oracle.Active(t, oracle_rng)) {
      EXPECT_DOUBLE_EQ(r, p.base_rate * (1.0 + p.burst_magnitude));
      ++loud;
    } else {
      EXPECT_DOUBLE_EQ(r, p.base_rate);
      ++quiet;
    }
  }
  EXPECT_GT(quiet, 0);
  EXPECT_GT(loud, 0);
}

TEST(Traffic, BurstDurationsWithinConfiguredRange) {
  BurstProcess b(600.0, 30.0, 120.0);
  Rng rng = MakeRng(4, {});
  double t = 0.0;
  for (int i = 0; i < 200; ++i) {
    b.Active(t, rng);
    const double d = b.window_end() - b.window_start();
    EXPECT_GE(d, 30.0);
    EXPECT_LE(d, 120.0);
    t = b.window_end();
  }
}

TEST(Traffic, MixedWithoutExtrasEqualsPeriodic) {
  TrafficPattern mixed = Pattern(TrafficKind::kMixed);
  mixed.noise_std = 0.0;
  mixed.burst_mean_interval = std::numeric_limits<double>::infinity();
  TrafficGenerator gm(mixed, 1440.0);
  TrafficGenerator gp(Pattern(TrafficKind::kPeriodic), 1440.0);
  Rng a = MakeRng(5, {}), b = MakeRng(5, {});
  for (double t = 0.0; t < 3000.0; t += 3.7) EXPECT_DOUBLE_EQ(gm.Rate(t, a), gp.Rate(t, b));
}

TEST(Traffic, RateNeverNegative) {
  TrafficPattern p = Pattern(TrafficKind::kMixed);
  p.noise_std = 20000.0;
  TrafficGenerator g(p, 1440.0);
  Rng rng = MakeRng(6, {});
  for (double t = 0.0; t < 5000.0; t += 1.0) EXPECT_GE(g.Rate(t, rng), 0.0);
}

TEST(Step, LightLoadMatchesClosedFormLatency) {
  EnvConfig c = QuietConfig();
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 3000.0;  // rho = 0.25
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  EnvState s = Reset(c, p, 0);
  const StepOutcome o = Step(s, c, 10000.0);
  EXPECT_EQ(o.n_rejected, 0);
  EXPECT_EQ(o.n_success, o.n_offered);
  EXPECT_EQ(o.n_errors, 0);
  const double rho = 3000.0 / c.service_capacity;
  const double expected = c.base_latency_ms / (1.0 - rho);
  EXPECT_NEAR(o.MeanLatency(), expected, 0.2 * expected);
}

TEST(Step, NoTrafficLeavesEverythingZero) {
  EnvConfig c = QuietConfig();
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 1e-9;
  p.burst_magnitude = 0.0;
  EnvState s = Reset(c, p, 0);
  const StepOutcome o = Step(s, c, 5000.0);
  EXPECT_EQ(o.n_offered, 0);
  EXPECT_EQ(o.n_admitted, 0);
  EXPECT_EQ(o.n_success, 0);
  EXPECT_EQ(o.n_rejected, 0);
  EXPECT_EQ(o.n_errors, 0);
  EXPECT_EQ(s.queue, 0);
  EXPECT_TRUE(o.latency_samples.empty());
}

TEST(Step, AdmissionCapArithmetic) {
  EnvConfig c = QuietConfig();
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 10.0 * c.bounds.min;
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  EnvState s = Reset(c, p, 0);
  const StepOutcome o = Step(s, c, c.bounds.min);
  EXPECT_EQ(o.n_rejected, o.n_offered - o.n_admitted);
  EXPECT_NEAR(static_cast<double>(o.n_rejected), 9.0 * c.bounds.min * c.step_duration, 1.0);
}

TEST(Step, RejectsThresholdOutsideBounds) {
  EnvConfig c;
  EnvState s = Reset(c, Pattern(TrafficKind::kMixed), 0);
  EXPECT_THROW(Step(s, c, 50.0), ContractViolation);
  EXPECT_THROW(Step(s, c, 1e6), ContractViolation);
}

TEST(Step, ConservationOverRandomRuns) {
  EnvConfig c;
  c.capacity_variation = 0.2;
  c.queue_capacity = 20000.0;
  for (TrafficKind kind : {TrafficKind::kPeriodic, TrafficKind::kBurst, TrafficKind::kMixed}) {
    EnvState s = Reset(c, Pattern(kind), 7);
    Rng rng = MakeRng(8, {});
    std::int64_t queue = 0;
    for (int i = 0; i < 2000; ++i) {
      const double theta = c.bounds.min + (c.bounds.max - c.bounds.min) * Uniform01(rng);
      const StepOutcome o = Step(s, c, theta);
      EXPECT_EQ(o.n_offered, o.n_admitted + o.n_rejected);
      EXPECT_EQ(o.n_admitted, o.n_success + o.n_errors + o.n_enqueued);
      EXPECT_EQ(s.queue, queue - o.n_dequeued + o.n_enqueued);
      EXPECT_LE(static_cast<double>(s.queue), c.queue_capacity);
      EXPECT_LE(static_cast<double>(o.n_completed()), o.capacity * c.step_duration + 1e-9);
      EXPECT_GE(o.next_state.error_rate, 0.0);
      EXPECT_LE(o.next_state.error_rate, 1.0);
      EXPECT_GE(o.next_state.cpu_util, 0.0);
      EXPECT_LE(o.next_state.cpu_util, 1.0);
      queue = s.queue;
    }
  }
}

TEST(Step, LatencyMonotoneInUtilization) {
  EnvConfig c = QuietConfig();
  double prev = 0.0;
  for (double rho = 0.0; rho <= 0.99; rho += 0.01) {
    TrafficPattern p = Pattern(TrafficKind::kBurst);
    p.base_rate = std::max(1.0, rho * c.service_capacity);
    p.burst_mean_interval = std::numeric_limits<double>::infinity();
    EnvState s = Reset(c, p, 0);
    const StepOutcome o = Step(s, c, c.bounds.max);
    EXPECT_GE(o.MeanLatency(), prev) << rho;
    prev = o.MeanLatency();
  }
}

TEST(Step, ThroughputSaturatesAtCapacity) {
  EnvConfig c = QuietConfig();
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 10.0 * c.service_capacity;
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  for (double theta : {c.service_capacity, 15000.0, c.bounds.max}) {
    EnvState s = Reset(c, p, 0);
    double completed = 0.0;
    const int steps = 50;
    for (int i = 0; i < steps; ++i) completed += static_cast<double>(Step(s, c, theta).n_completed());
    const double rate = completed / (steps * c.step_duration);
    EXPECT_NEAR(rate, c.service_capacity, 0.01 * c.service_capacity) << theta;
  }
}

TEST(Step, DeterministicForSameSeedAndActions) {
  EnvConfig c;
  c.capacity_variation = 0.2;
  EnvState a = Reset(c, Pattern(TrafficKind::kMixed), 3);
  EnvState b = Reset(c, Pattern(TrafficKind::kMixed), 3);
  EXPECT_TRUE(a == b);
  for (int i = 0; i < 300; ++i) {
    const double theta = 2000.0 + 40.0 * i;
    const StepOutcome oa = Step(a, c, theta);
    const StepOutcome ob = Step(b, c, theta);
    EXPECT_EQ(oa.n_offered, ob.n_offered);
    EXPECT_EQ(oa.n_completed(), ob.n_completed());
    EXPECT_EQ(oa.MeanLatency(), ob.MeanLatency());
  }
  EXPECT_TRUE(a == b);
}

TEST(Reset, SeedsAndInitialConditions) {
  EnvConfig c;
  EnvConfig d = c;
  d.seed = c.seed + 1;
  const EnvState a = Reset(c, Pattern(TrafficKind::kMixed));
  const EnvState b = Reset(d, Pattern(TrafficKind::kMixed));
  EXPECT_FALSE(a.rng == b.rng);
  EXPECT_EQ(a.state.queue_len, 0.0);
  EXPECT_EQ(a.state.error_rate, 0.0);
  EXPECT_EQ(a.queue, 0);
  EXPECT_TRUE(c.bounds.Contains(a.state.threshold));
}

TEST(Step, LatencySamplesAreMeanPreserving) {
  EnvConfig c;
  c.latency_samples = 20000;
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 6000.0;
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  EnvState s = Reset(c, p, 0);
  const StepOutcome o = Step(s, c, 10000.0);
  EXPECT_NEAR(o.MeanLatency(), o.model_latency_ms, 0.01 * o.model_latency_ms);
}

TEST(Guard, Examples) {
  EXPECT_DOUBLE_EQ(MinIntervalGuard(0.0, 10.0, 2000.0, 1000.0, 30.0), 1000.0);
  EXPECT_DOUBLE_EQ(MinIntervalGuard(0.0, 31.0, 2000.0, 1000.0, 30.0), 2000.0);
  ChangeGuard g(30.0);
  EXPECT_DOUBLE_EQ(g.Apply(0.0, 2000.0, 1000.0), 2000.0);
  EXPECT_DOUBLE_EQ(g.last_change(), 0.0);
  EXPECT_DOUBLE_EQ(g.Apply(10.0, 2000.0, 2000.0), 2000.0);  // no-op leaves the timer alone
  EXPECT_DOUBLE_EQ(g.last_change(), 0.0);
  EXPECT_DOUBLE_EQ(g.Apply(20.0, 3000.0, 2000.0), 2000.0);
  EXPECT_DOUBLE_EQ(g.Apply(30.0, 3000.0, 2000.0), 3000.0);
  EXPECT_DOUBLE_EQ(g.last_change(), 30.0);
}

TEST(RateLimitEnv, ThresholdNeverChangesTwiceWithinInterval) {
  EnvConfig c;
  RateLimitEnv env(c, Pattern(TrafficKind::kMixed), RewardConfig{});
  Rng rng = MakeRng(12, {});
  double last_change = -1e9;
  double theta = env.state().state.threshold;
  for (int i = 0; i < 3000; ++i) {
    const double now = env.state().sim_time;
    const auto s = env.StepThreshold(c.bounds.min + (c.bounds.max - c.bounds.min) * Uniform01(rng));
    if (s.theta_applied != theta) {
      EXPECT_GE(now - last_change, c.min_change_interval);
      last_change = now;
      theta = s.theta_applied;
    }
    // Arbitrary jumps: the stability penalty is bounded by the widest relative move.
    EXPECT_GE(s.rl.reward, -0.1 * (c.bounds.max / c.bounds.min - 1.0) - 1e-12);
    EXPECT_LE(s.rl.reward, 0.9 + 1e-12);
  }
}

TEST(RateLimitEnv, ObservationShapeAndTemporalAblation) {
  EnvConfig c;
  RateLimitEnv env(c, Pattern(TrafficKind::kMixed), RewardConfig{});
  RateLimitEnv flat(c, Pattern(TrafficKind::kMixed), RewardConfig{}, true);
  const Vector o = env.Reset();
  const Vector f = flat.Reset();
  ASSERT_EQ(o.size(), 9);
  EXPECT_EQ(f[7], 0.0);
  EXPECT_EQ(f[8], 0.0);
  EXPECT_EQ(o[8], 1.0);  // cos(0)
  for (int i = 0; i < 7; ++i) EXPECT_EQ(o[i], f[i]);
}

TEST(RateLimitEnv, CollapseEndsEpisode) {
  EnvConfig c = QuietConfig();
  c.service_capacity = 0.01;  // well under one completion per step
  c.queue_capacity = 10.0;
  TrafficPattern p = Pattern(TrafficKind::kBurst);
  p.base_rate = 50000.0;
  p.burst_mean_interval = std::numeric_limits<double>::infinity();
  RateLimitEnv env(c, p, RewardConfig{});
  env.Reset();
  int steps = 0;
  bool done = false;
  while (!done && steps < 100) {
    done = env.StepThreshold(c.bounds.max).rl.done;
    ++steps;
  }
  EXPECT_TRUE(done);
  EXPECT_GE(steps, RateLimitEnv::kCollapseSteps);
}

TEST(BanditEnv, AlwaysTerminalWithArmReward) {
  BanditEnv env({0.0, 1.0});
  EXPECT_EQ(env.optimal_action(), 1);
  const Vector o = env.Reset();
  EXPECT_EQ(o.size(), 9);
  const EnvStep s = env.Step(1);
  EXPECT_TRUE(s.done);
  EXPECT_EQ(s.reward, 1.0);
  EXPECT_EQ(env.Step(0).reward, 0.0);
}

}  // namespace
}  // namespace ratelab
