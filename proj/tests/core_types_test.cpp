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

#include <cmath>
#include <numbers>

#include "ratelab/common.hpp"
#include "ratelab/core_types.hpp"

namespace ratelab {
namespace {

TEST(TemporalFeatures, QuarterPoints) {
  auto f0 = TemporalFeatures(0.0);
  EXPECT_DOUBLE_EQ(f0[0], 0.0);
  EXPECT_DOUBLE_EQ(f0[1], 1.0);
  auto f6 = TemporalFeatures(6.0);
  EXPECT_NEAR(f6[0], 1.0, 1e-15);
  EXPECT_NEAR(f6[1], 0.0, 1e-15);
  auto f12 = TemporalFeatures(12.0);
  EXPECT_NEAR(f12[0], 0.0, 1e-15);
  EXPECT_NEAR(f12[1], -1.0, 1e-15);
}

TEST(TemporalFeatures, RejectsHoursOutsideDay) {
  EXPECT_THROW(TemporalFeatures(24.0), DomainError);
  EXPECT_THROW(TemporalFeatures(-0.5), DomainError);
  EXPECT_THROW(TemporalFeatures(std::nan("")), DomainError);
}

TEST(TemporalFeatures, MidnightNeighbours) {
  auto late = TemporalFeatures(23.999);
  auto early = TemporalFeatures(0.0);
  EXPECT_NEAR(late[0], early[0], 1e-3);
  EXPECT_NEAR(late[1], early[1], 1e-3);
}

TEST(EwmaSmooth, Examples) {
  EXPECT_DOUBLE_EQ(EwmaSmooth(10.0, 10.0, 0.9), 10.0);
  EXPECT_NEAR(EwmaSmooth(0.0, 10.0, 0.9), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(EwmaSmooth(5.0, 15.0, 0.0), 15.0);
  EXPECT_THROW(EwmaSmooth(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(EwmaSmooth(0.0, 1.0, -0.1), DomainError);
}

TEST(EwmaSmooth, StaysBetweenPreviousAndCurrent) {
  Rng rng = MakeRng(11, {});
  for (int i = 0; i < 10000; ++i) {
    const double prev = 200.0 * Uniform01(rng) - 100.0;
    const double cur = 200.0 * Uniform01(rng) - 100.0;
    const double beta = 0.999 * Uniform01(rng);
    const double s = EwmaSmooth(prev, cur, beta);
    EXPECT_GE(s, std::min(prev, cur) - 1e-12);
    EXPECT_LE(s, std::max(prev, cur) + 1e-12);
  }
}

NormalizationSpec TestSpec() { return NormalizationSpec::ForExperiment({100.0, 20000.0}, 500.0, 50000.0); }

TEST(EncodeState, MinimumMapsToZero) {
  const auto spec = TestSpec();
  SystemState s;
  s.request_rate = spec.request_rate.min;
  s.threshold = spec.threshold.min;
  s.avg_latency_ms = spec.latency_ms.min;
  s.queue_len = spec.queue_len.min;
  s.temporal = TemporalFeatures(3.0);
  const auto e = EncodeState(s, spec);
  for (int i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(e[i], 0.0) << i;
  EXPECT_DOUBLE_EQ(e[7], s.temporal[0]);
  EXPECT_DOUBLE_EQ(e[8], s.temporal[1]);
}

TEST(EncodeState, MaximumMapsToOne) {
  const auto spec = TestSpec();
  SystemState s;
  s.request_rate = spec.request_rate.max;
  s.cpu_util = 1.0;
  s.mem_util = 1.0;
  s.threshold = spec.threshold.max;
  s.avg_latency_ms = spec.latency_ms.max;
  s.queue_len = spec.queue_len.max;
  s.error_rate = 1.0;
  const auto e = EncodeState(s, spec);
  for (int i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(e[i], 1.0) << i;
}

TEST(EncodeState, MidpointRate) {
  const auto spec = TestSpec();
  SystemState s;
  s.request_rate = 0.5 * (spec.request_rate.min + spec.request_rate.max);
  EXPECT_DOUBLE_EQ(EncodeState(s, spec)[0], 0.5);
}

TEST(EncodeState, ClipsOutOfRangeAndIsPure) {
  const auto spec = TestSpec();
  Rng rng = MakeRng(3, {});
  for (int i = 0; i < 1000; ++i) {
    SystemState s;
    s.request_rate = 1e5 * (Uniform01(rng) - 0.2);
    s.cpu_util = 2.0 * Uniform01(rng) - 0.5;
    s.mem_util = 2.0 * Uniform01(rng) - 0.5;
    s.threshold = 3e4 * Uniform01(rng);
    s.avg_latency_ms = 1e4 * Uniform01(rng);
    s.queue_len = 1e5 * Uniform01(rng);
    s.error_rate = 1.5 * Uniform01(rng);
    s.temporal = TemporalFeatures(24.0 * Uniform01(rng));
    const auto a = EncodeState(s, spec);
    const auto b = EncodeState(s, spec);
    EXPECT_EQ(a, b);
    for (int k = 0; k < 7; ++k) {
      EXPECT_GE(a[k], 0.0);
      EXPECT_LE(a[k], 1.0);
    }
  }
}

TEST(ApplyAction, Examples) {
  const ThresholdBounds b{100.0, 10000.0};
  EXPECT_DOUBLE_EQ(ApplyAction(1000.0, *Action::FromMultiplier(0.1), b), 1100.0);
  EXPECT_DOUBLE_EQ(ApplyAction(1000.0, *Action::FromMultiplier(0.0), b), 1000.0);
  EXPECT_DOUBLE_EQ(ApplyAction(1000.0, *Action::FromMultiplier(0.0), ThresholdBounds{1.0, 1e6}), 1000.0);
  EXPECT_DOUBLE_EQ(ApplyAction(150.0, *Action::FromMultiplier(-0.5), b), 100.0);
}

TEST(ApplyAction, MonotoneInMultiplierAndBounded) {
  Rng rng = MakeRng(5, {});
  for (int i = 0; i < 2000; ++i) {
    const double lo = 1.0 + 1000.0 * Uniform01(rng);
    const ThresholdBounds b{lo, lo + 1.0 + 50000.0 * Uniform01(rng)};
    const double theta = b.min + (b.max - b.min) * Uniform01(rng);
    double prev = -1.0;
    for (int a = 0; a < static_cast<int>(kNumActions); ++a) {
      const double next = ApplyAction(theta, Action::FromIndex(a), b);
      EXPECT_TRUE(b.Contains(next));
      EXPECT_GE(next, prev);
      prev = next;
    }
  }
}

TEST(Action, IndexMultiplierRoundTrip) {
  for (int i = 0; i < static_cast<int>(kNumActions); ++i) {
    const Action a = Action::FromIndex(i);
    const auto back = Action::FromMultiplier(a.multiplier());
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(back->index(), i);
  }
  EXPECT_EQ(Action::FromIndex(kNoChangeAction).multiplier(), 0.0);
  EXPECT_FALSE(Action::FromMultiplier(0.3).has_value());
  EXPECT_THROW(Action::FromIndex(7), ContractViolation);
  EXPECT_THROW(Action::FromIndex(-1), ContractViolation);
}

TEST(ThresholdBounds, Validation) {
  EXPECT_NO_THROW((ThresholdBounds{100.0, 20000.0}.Validate()));
  EXPECT_THROW((ThresholdBounds{0.0, 10.0}.Validate()), ContractViolation);
  EXPECT_THROW((ThresholdBounds{10.0, 10.0}.Validate()), ContractViolation);
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  Rng a = MakeRng(1, {2});
  Rng b = MakeRng(1, {2});
  Rng c = MakeRng(1, {3});
  EXPECT_EQ(a(), b());
  EXPECT_NE(MakeRng(1, {2})(), c());
  for (int i = 0; i < 1000; ++i) {
    const double u = Uniform01(a);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(UniformIndex(a, 7), 7u);
  }
}

}  // namespace
}  // namespace ratelab
