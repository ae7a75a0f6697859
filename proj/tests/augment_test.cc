/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "accup/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "accup/error.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace accup {
namespace {

using testing::RandomBatch;

std::vector<AugmentSpec> AllSpecs() {
  return {AugmentSpec::None(),
          AugmentSpec::MagnitudeWarp(),
          AugmentSpec::MagnitudeWarp(0.3, 6),
          AugmentSpec::Jitter(),
          AugmentSpec::Scale(),
          AugmentSpec::Permutation(),
          AugmentSpec::Permutation(3),
          AugmentSpec::Compose({AugmentSpec::Jitter(), AugmentSpec::Scale()})};
}

TEST(MagnitudeWarpTest, ZeroSigmaIsIdentity) {
  SeedStream rng(1);
  const SignalBatch x = RandomBatch(4, 3, 50, rng);
  for (auto interp : {WarpInterpolation::kNaturalCubic, WarpInterpolation::kLinear}) {
    AugmentSpec spec = AugmentSpec::MagnitudeWarp(0.0);
    spec.interpolation = interp;
    SeedStream draw(2);
    const SignalBatch y = Augment(x, spec, draw);
    EXPECT_EQ(y, x);
  }
}

TEST(MagnitudeWarpTest, CurveMeanIsOne) {
  SeedStream rng(3);
  const AugmentSpec spec = AugmentSpec::MagnitudeWarp(0.2);
  double sum = 0.0;
  std::size_t n = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    for (double v : WarpCurve(64, spec, rng)) {
      sum += v;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
}

TEST(MagnitudeWarpTest, CurveIsSmoothAndVaries) {
  SeedStream rng(4);
  const std::vector<double> c = WarpCurve(128, AugmentSpec::MagnitudeWarp(0.2), rng);
  ASSERT_EQ(c.size(), 128u);
  double max_step = 0.0;
  for (std::size_t t = 1; t < c.size(); ++t) {
    max_step = std::max(max_step, std::abs(c[t] - c[t - 1]));
  }
  EXPECT_GT(*std::max_element(c.begin(), c.end()) -
                *std::min_element(c.begin(), c.end()),
            1e-3);
  EXPECT_LT(max_step, 0.1);
}

TEST(MagnitudeWarpTest, EachSeriesGetsItsOwnCurve) {
  SignalBatch x(2, 2, 32);
  std::fill(x.mutable_values().begin(), x.mutable_values().end(), 1.0);
  SeedStream rng(5);
  const SignalBatch y = Augment(x, AugmentSpec::MagnitudeWarp(), rng);
  const auto a = y.series(0, 0);
  const auto b = y.series(0, 1);
  const auto c = y.series(1, 0);
  EXPECT_FALSE(std::equal(a.begin(), a.end(), b.begin()));
  EXPECT_FALSE(std::equal(a.begin(), a.end(), c.begin()));
}

TEST(SplineTest, NaturalCubicMatchesHandSolution) {
  // Knots (0,0), (1,1), (2,0): the natural end conditions give M1 = -3, so
  // S(0.5) = -3 * 0.5^3 / 6 + (1 + 0.5) * 0.5 = 0.6875.
  const std::vector<double> xs = {0, 1, 2}, ys = {0, 1, 0};
  const std::vector<double> at = {0.0, 0.5, 1.0, 1.5, 2.0};
  const std::vector<double> s = NaturalCubicSpline(xs, ys, at);
  EXPECT_NEAR(s[0], 0.0, 1e-15);
  EXPECT_NEAR(s[1], 0.6875, 1e-15);
  EXPECT_NEAR(s[2], 1.0, 1e-15);
  EXPECT_NEAR(s[3], 0.6875, 1e-15);
  EXPECT_NEAR(s[4], 0.0, 1e-15);
}

TEST(SplineTest, ReproducesLinesExactly) {
  const std::vector<double> xs = {0, 2, 3, 7}, ys = {1, 5, 7, 15};
  const std::vector<double> at = {0.5, 1.0, 2.5, 6.0};
  const auto cubic = NaturalCubicSpline(xs, ys, at);
  const auto lin = LinearInterpolate(xs, ys, at);
  for (std::size_t i = 0; i < at.size(); ++i) {
    EXPECT_NEAR(cubic[i], 1.0 + 2.0 * at[i], 1e-12);
    EXPECT_NEAR(lin[i], 1.0 + 2.0 * at[i], 1e-12);
  }
}

TEST(AugmentTest, ShapePreservedForEverySpec) {
  SeedStream rng(6);
  const SignalBatch x = RandomBatch(3, 2, 40, rng);
  for (const auto& spec : AllSpecs()) {
    const SignalBatch y = Augment(x, spec, rng);
    EXPECT_EQ(y.batch(), x.batch()) << AugmentKindName(spec.kind);
    EXPECT_EQ(y.channels(), x.channels());
    EXPECT_EQ(y.length(), x.length());
    for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(AugmentTest, SameSeedIsBitwiseReproducible) {
  SeedStream rng(7);
  const SignalBatch x = RandomBatch(3, 2, 40, rng);
  for (const auto& spec : AllSpecs()) {
    SeedStream a(99), b(99);
    EXPECT_EQ(Augment(x, spec, a), Augment(x, spec, b)) << AugmentKindName(spec.kind);
  }
}

TEST(AugmentTest, ComposeWithNoneIsTheOtherStep) {
  SeedStream rng(8);
  const SignalBatch x = RandomBatch(2, 3, 30, rng);
  for (const auto& spec : AllSpecs()) {
    SeedStream a(5), b(5);
    const AugmentSpec composed = AugmentSpec::Compose({AugmentSpec::None(), spec});
    EXPECT_EQ(Augment(x, composed, a), Augment(x, spec, b)) << AugmentKindName(spec.kind);
  }
}

TEST(JitterTest, ZeroSigmaIsIdentity) {
  SeedStream rng(9);
  const SignalBatch x = RandomBatch(2, 2, 16, rng);
  EXPECT_EQ(Augment(x, AugmentSpec::Jitter(0.0), rng), x);
}

TEST(JitterTest, NoiseHasRequestedSpread) {
  SignalBatch x(50, 2, 100);
  SeedStream rng(10);
  const SignalBatch y = Augment(x, AugmentSpec::Jitter(0.5), rng);
  double ss = 0.0;
  for (double v : y.values()) ss += v * v;
  const double sd = std::sqrt(ss / static_cast<double>(y.values().size()));
  EXPECT_NEAR(sd, 0.5, 0.02);
}

TEST(PermutationTest, OneSegmentIsIdentity) {
  SeedStream rng(11);
  const SignalBatch x = RandomBatch(2, 2, 17, rng);
  EXPECT_EQ(Augment(x, AugmentSpec::Permutation(1), rng), x);
}

TEST(PermutationTest, ChannelsShareOnePermutation) {
  // Channel c holds t + 1000 c, so the time index of every output element
  // can be read back.
  SignalBatch x(1, 3, 20);
  for (std::size_t c = 0; c < 3; ++c) {
    auto s = x.mutable_series(0, c);
    for (std::size_t t = 0; t < 20; ++t) s[t] = static_cast<double>(t + 1000 * c);
  }
  SeedStream rng(12);
  const SignalBatch y = Augment(x, AugmentSpec::Permutation(4), rng);
  std::vector<double> times(y.series(0, 0).begin(), y.series(0, 0).end());
  for (std::size_t c = 1; c < 3; ++c) {
    for (std::size_t t = 0; t < 20; ++t) {
      EXPECT_EQ(y.series(0, c)[t] - 1000.0 * static_cast<double>(c), times[t]);
    }
  }
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(sorted[t], static_cast<double>(t));
  // Runs of consecutive time indices are the segments.
  std::size_t runs = 1;
  for (std::size_t t = 1; t < 20; ++t) runs += times[t] != times[t - 1] + 1.0;
  EXPECT_LE(runs, 4u);
}

TEST(ScaleTest, RatioIsConstantOverTime) {
  // Powers of two make every product exact, so the ratio must be identical.
  SignalBatch x(3, 2, 12);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      auto s = x.mutable_series(i, c);
      for (std::size_t t = 0; t < 12; ++t) {
        s[t] = std::ldexp(t % 2 ? -1.0 : 1.0, static_cast<int>(t) - 6);
      }
    }
  }
  SeedStream rng(13);
  const SignalBatch y = Augment(x, AugmentSpec::Scale(0.5), rng);
  std::vector<double> factors;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double r0 = y.series(i, c)[0] / x.series(i, c)[0];
      for (std::size_t t = 1; t < 12; ++t) {
        EXPECT_EQ(y.series(i, c)[t] / x.series(i, c)[t], r0);
      }
      factors.push_back(r0);
    }
  }
  EXPECT_NE(factors[0], factors[1]);
}

TEST(AugmentSpecTest, ValidateRejectsBadSpecs) {
  auto expect_config = [](const AugmentSpec& s) {
    try {
      s.Validate();
      ADD_FAILURE() << "accepted " << AugmentKindName(s.kind);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    }
  };
  expect_config(AugmentSpec::MagnitudeWarp(-0.1));
  expect_config(AugmentSpec::MagnitudeWarp(0.2, 1));
  expect_config(AugmentSpec::Permutation(0));
  expect_config(AugmentSpec::Compose({}));
}

TEST(AugmentSpecTest, KindNamesRoundTrip) {
  for (auto k : {AugmentKind::kNone, AugmentKind::kMagnitudeWarp, AugmentKind::kJitter,
                 AugmentKind::kScale, AugmentKind::kPermutation, AugmentKind::kCompose}) {
    EXPECT_EQ(ParseAugmentKind(AugmentKindName(k)), k);
  }
  EXPECT_THROW(ParseAugmentKind("warp-speed"), Error);
}

}  // namespace
}  // namespace accup
