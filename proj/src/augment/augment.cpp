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
#include <numeric>
#include <utility>

#include "accup/error.hpp"

namespace accup {

const char* AugmentKindName(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kNone:
      return "none";
    case AugmentKind::kMagnitudeWarp:
      return "magnitude-warp";
    case AugmentKind::kJitter:
      return "jitter";
    case AugmentKind::kScale:
      return "scale";
    case AugmentKind::kPermutation:
      return "permutation";
    case AugmentKind::kCompose:
      return "compose";
  }
  return "none";
}

AugmentKind ParseAugmentKind(const std::string& name) {
  for (AugmentKind k :
       {AugmentKind::kNone, AugmentKind::kMagnitudeWarp, AugmentKind::kJitter,
        AugmentKind::kScale, AugmentKind::kPermutation, AugmentKind::kCompose}) {
    if (name == AugmentKindName(k)) return k;
  }
  Fail(ErrorKind::kConfig, "unknown augmentation kind '" + name + "'");
}

AugmentSpec AugmentSpec::None() {
  AugmentSpec s;
  s.kind = AugmentKind::kNone;
  s.sigma = 0.0;
  return s;
}

AugmentSpec AugmentSpec::MagnitudeWarp(double sigma, std::size_t knots) {
  AugmentSpec s;
  s.kind = AugmentKind::kMagnitudeWarp;
  s.sigma = sigma;
  s.knots = knots;
  return s;
}

AugmentSpec AugmentSpec::Jitter(double sigma) {
  AugmentSpec s;
  s.kind = AugmentKind::kJitter;
  s.sigma = sigma;
  return s;
}

AugmentSpec AugmentSpec::Scale(double sigma) {
  AugmentSpec s;
  s.kind = AugmentKind::kScale;
  s.sigma = sigma;
  return s;
}

AugmentSpec AugmentSpec::Permutation(std::size_t segments) {
  AugmentSpec s;
  s.kind = AugmentKind::kPermutation;
  s.sigma = 0.0;
  s.segments = segments;
  return s;
}

AugmentSpec AugmentSpec::Compose(std::vector<AugmentSpec> steps) {
  AugmentSpec s;
  s.kind = AugmentKind::kCompose;
  s.sigma = 0.0;
  s.steps = std::move(steps);
  return s;
}

void AugmentSpec::Validate() const {
  if (!(sigma >= 0.0)) {
    Fail(ErrorKind::kConfig, "augmentation sigma must be >= 0");
  }
  if (knots < 2) Fail(ErrorKind::kConfig, "warp knots must be >= 2");
  if (segments < 1) Fail(ErrorKind::kConfig, "permutation segments must be >= 1");
  if (kind == AugmentKind::kCompose) {
    if (steps.empty()) Fail(ErrorKind::kConfig, "compose list is empty");
    for (const auto& s : steps) s.Validate();
  }
}

std::vector<double> NaturalCubicSpline(std::span<const double> xs,
                                       std::span<const double> ys,
                                       std::span<const double> at) {
  const std::size_t n = xs.size();
  Require(n >= 2 && ys.size() == n, ErrorKind::kConfig,
          "spline needs at least two knots with matching values");
  // Second derivatives m[0..n-1], m[0] = m[n-1] = 0; tridiagonal solve for
  // the interior by forward elimination / back substitution.
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs[i + 1] - xs[i];
    Require(h[i] > 0.0, ErrorKind::kConfig, "spline knots must increase");
  }
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      diag[i] = 2.0 * (h[i] + h[i + 1]);
      upper[i] = h[i + 1];
      rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] -
                      (ys[i + 1] - ys[i]) / h[i]);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = h[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i) {
      m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
    }
  }
  std::vector<double> out(at.size());
  for (std::size_t q = 0; q < at.size(); ++q) {
    const double t = at[q];
    std::size_t i = static_cast<std::size_t>(
        std::upper_bound(xs.begin(), xs.end(), t) - xs.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    const double a = xs[i + 1] - t;
    const double b = t - xs[i];
    const double hi = h[i];
    out[q] = m[i] * a * a * a / (6.0 * hi) + m[i + 1] * b * b * b / (6.0 * hi) +
             (ys[i] / hi - m[i] * hi / 6.0) * a +
             (ys[i + 1] / hi - m[i + 1] * hi / 6.0) * b;
  }
  return out;
}

std::vector<double> LinearInterpolate(std::span<const double> xs,
                                      std::span<const double> ys,
                                      std::span<const double> at) {
  const std::size_t n = xs.size();
  Require(n >= 2 && ys.size() == n, ErrorKind::kConfig,
          "interpolation needs at least two knots with matching values");
  std::vector<double> out(at.size());
  for (std::size_t q = 0; q < at.size(); ++q) {
    std::size_t i = static_cast<std::size_t>(
        std::upper_bound(xs.begin(), xs.end(), at[q]) - xs.begin());
    i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
    const double w = (at[q] - xs[i]) / (xs[i + 1] - xs[i]);
    out[q] = ys[i] + w * (ys[i + 1] - ys[i]);
  }
  return out;
}

std::vector<double> WarpCurve(std::size_t length, const AugmentSpec& spec,
                              SeedStream& rng) {
  if (length < spec.knots) {
    Fail(ErrorKind::kConfig, "magnitude warp: series length " +
                                 std::to_string(length) + " < knots " +
                                 std::to_string(spec.knots));
  }
  // sigma = 0 gives the constant curve exactly; skip draws and interpolation.
  if (spec.sigma == 0.0) return std::vector<double>(length, 1.0);
  std::vector<double> xs(spec.knots), ys(spec.knots), at(length);
  const double span = static_cast<double>(length - 1);
  for (std::size_t j = 0; j < spec.knots; ++j) {
    xs[j] = span * static_cast<double>(j) / static_cast<double>(spec.knots - 1);
    ys[j] = rng.Normal(1.0, spec.sigma);
  }
  std::iota(at.begin(), at.end(), 0.0);
  return spec.interpolation == WarpInterpolation::kNaturalCubic
             ? NaturalCubicSpline(xs, ys, at)
             : LinearInterpolate(xs, ys, at);
}

SignalBatch MagnitudeWarp(const SignalBatch& x, const AugmentSpec& spec,
                          SeedStream& rng) {
  spec.Validate();
  if (x.length() < spec.knots) {
    Fail(ErrorKind::kConfig, "magnitude warp: series length " +
                                 std::to_string(x.length()) + " < knots " +
                                 std::to_string(spec.knots));
  }
  SignalBatch out = x;
  for (std::size_t i = 0; i < x.batch(); ++i) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const std::vector<double> curve = WarpCurve(x.length(), spec, rng);
      auto s = out.mutable_series(i, c);
      for (std::size_t t = 0; t < s.size(); ++t) s[t] *= curve[t];
    }
  }
  return out;
}

SignalBatch Jitter(const SignalBatch& x, const AugmentSpec& spec,
                   SeedStream& rng) {
  spec.Validate();
  SignalBatch out = x;
  if (spec.sigma == 0.0) return out;
  for (double& v : out.mutable_values()) v += rng.Normal(0.0, spec.sigma);
  return out;
}

SignalBatch Scale(const SignalBatch& x, const AugmentSpec& spec,
                  SeedStream& rng) {
  spec.Validate();
  SignalBatch out = x;
  if (spec.sigma == 0.0) return out;
  for (std::size_t i = 0; i < x.batch(); ++i) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const double factor = rng.Normal(1.0, spec.sigma);
      for (double& v : out.mutable_series(i, c)) v *= factor;
    }
  }
  return out;
}

SignalBatch Permutation(const SignalBatch& x, const AugmentSpec& spec,
                        SeedStream& rng) {
  spec.Validate();
  const std::size_t len = x.length();
  if (spec.segments > len) {
    Fail(ErrorKind::kConfig, "permutation: segments " +
                                 std::to_string(spec.segments) +
                                 " > series length " + std::to_string(len));
  }
  SignalBatch out = x;
  if (spec.segments == 1) return out;
  // Piece k covers [bounds[k], bounds[k+1]); sizes differ by at most one.
  std::vector<std::size_t> bounds(spec.segments + 1);
  for (std::size_t k = 0; k <= spec.segments; ++k) {
    bounds[k] = k * len / spec.segments;
  }
  std::vector<std::size_t> order(spec.segments);
  for (std::size_t i = 0; i < x.batch(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t c = 0; c < x.channels(); ++c) {
      auto src = x.series(i, c);
      auto dst = out.mutable_series(i, c);
      std::size_t t = 0;
      for (std::size_t piece : order) {
        for (std::size_t u = bounds[piece]; u < bounds[piece + 1]; ++u) {
          dst[t++] = src[u];
        }
      }
    }
  }
  return out;
}

SignalBatch Augment(const SignalBatch& x, const AugmentSpec& spec,
                    SeedStream& rng) {
  switch (spec.kind) {
    case AugmentKind::kNone:
      return x;
    case AugmentKind::kMagnitudeWarp:
      return MagnitudeWarp(x, spec, rng);
    case AugmentKind::kJitter:
      return Jitter(x, spec, rng);
    case AugmentKind::kScale:
      return Scale(x, spec, rng);
    case AugmentKind::kPermutation:
      return Permutation(x, spec, rng);
    case AugmentKind::kCompose: {
      spec.Validate();
      SignalBatch out = x;
      for (const auto& step : spec.steps) out = Augment(out, step, rng);
      return out;
    }
  }
  return x;
}

}  // namespace accup
