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

// Label-preserving time-series augmentations. All of them keep the batch
// shape and are bitwise reproducible for a given SeedStream state.

#ifndef ACCUP_AUGMENT_HPP_
#define ACCUP_AUGMENT_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "accup/random.hpp"
#include "accup/series.hpp"

namespace accup {

enum class AugmentKind {
  kNone,
  kMagnitudeWarp,
  kJitter,
  kScale,
  kPermutation,
  kCompose,
};

enum class WarpInterpolation { kNaturalCubic, kLinear };

const char* AugmentKindName(AugmentKind kind);
AugmentKind ParseAugmentKind(const std::string& name);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::kMagnitudeWarp;
  // Dispersion of the warp knots, the jitter noise or the scale factor.
  double sigma = 0.2;
  // Warp control points, evenly spaced with both endpoints included.
  std::size_t knots = 4;
  // Permutation pieces.
  std::size_t segments = 5;
  WarpInterpolation interpolation = WarpInterpolation::kNaturalCubic;
  // Steps of a compose, applied left to right.
  std::vector<AugmentSpec> steps;

  static AugmentSpec None();
  static AugmentSpec MagnitudeWarp(double sigma = 0.2, std::size_t knots = 4);
  static AugmentSpec Jitter(double sigma = 0.03);
  static AugmentSpec Scale(double sigma = 0.1);
  static AugmentSpec Permutation(std::size_t segments = 5);
  static AugmentSpec Compose(std::vector<AugmentSpec> steps);

  // Throws ErrorKind::kConfig on sigma < 0, knots < 2, segments < 1 or an
  // empty compose list.
  void Validate() const;

  bool operator==(const AugmentSpec&) const = default;
};

// Dispatches on spec.kind.
SignalBatch Augment(const SignalBatch& x, const AugmentSpec& spec,
                    SeedStream& rng);

// Multiplies every (sample, channel) series by its own smooth random curve
// through knot values drawn from Normal(1, sigma^2).
SignalBatch MagnitudeWarp(const SignalBatch& x, const AugmentSpec& spec,
                          SeedStream& rng);
// Adds Normal(0, sigma^2) noise per element.
SignalBatch Jitter(const SignalBatch& x, const AugmentSpec& spec,
                   SeedStream& rng);
// Multiplies each (sample, channel) series by one Normal(1, sigma^2) factor.
SignalBatch Scale(const SignalBatch& x, const AugmentSpec& spec,
                  SeedStream& rng);
// Cuts the time axis into `segments` near-equal pieces and shuffles them;
// all channels of a sample share the permutation.
SignalBatch Permutation(const SignalBatch& x, const AugmentSpec& spec,
                        SeedStream& rng);

// One warp curve of the given length.
std::vector<double> WarpCurve(std::size_t length, const AugmentSpec& spec,
                              SeedStream& rng);

// Natural cubic spline through (xs, ys) evaluated at `at`. xs strictly
// increasing, at least two knots.
std::vector<double> NaturalCubicSpline(std::span<const double> xs,
                                       std::span<const double> ys,
                                       std::span<const double> at);
std::vector<double> LinearInterpolate(std::span<const double> xs,
                                      std::span<const double> ys,
                                      std::span<const double> at);

}  // namespace accup

#endif  // ACCUP_AUGMENT_HPP_
