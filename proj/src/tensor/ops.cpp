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

#include "accup/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "accup/error.hpp"

namespace accup::ops {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

[[noreturn]] void ShapeMismatch(const char* op, const Tensor& a,
                                const Tensor& b) {
  Fail(ErrorKind::kConformance, std::string(op) + ": shapes " +
                                    ShapeToString(a.shape()) + " and " +
                                    ShapeToString(b.shape()) +
                                    " do not conform");
}

// How one operand of a binary op maps onto the output index space.
enum class Broadcast { kSame, kScalar, kRow };

struct BinaryPlan {
  Shape shape;
  Broadcast a = Broadcast::kSame;
  Broadcast b = Broadcast::kSame;
  std::size_t row = 1;
};

BinaryPlan PlanBinary(const char* op, const Tensor& a, const Tensor& b) {
  BinaryPlan plan;
  if (a.shape() == b.shape()) {
    plan.shape = a.shape();
    return plan;
  }
  auto fits_row = [](const Tensor& small, const Tensor& big) {
    return small.rank() == 1 && big.rank() >= 1 &&
           small.dim(0) == big.shape().back();
  };
  if (b.numel() == 1) {
    plan.shape = a.shape();
    plan.b = Broadcast::kScalar;
  } else if (a.numel() == 1) {
    plan.shape = b.shape();
    plan.a = Broadcast::kScalar;
  } else if (fits_row(b, a)) {
    plan.shape = a.shape();
    plan.b = Broadcast::kRow;
    plan.row = b.dim(0);
  } else if (fits_row(a, b)) {
    plan.shape = b.shape();
    plan.a = Broadcast::kRow;
    plan.row = a.dim(0);
  } else {
    ShapeMismatch(op, a, b);
  }
  return plan;
}

inline std::size_t Map(Broadcast mode, std::size_t i, std::size_t row) {
  switch (mode) {
    case Broadcast::kSame:
      return i;
    case Broadcast::kScalar:
      return 0;
    case Broadcast::kRow:
      return i % row;
  }
  return i;
}

// Sums a full-size gradient down to an operand's broadcast footprint.
void AccumulateReduced(const Tensor& target, Broadcast mode, std::size_t row,
                       std::span<const double> full) {
  if (!target.requires_grad()) return;
  auto grad = GradBuffer(target);
  for (std::size_t i = 0; i < full.size(); ++i) {
    grad[Map(mode, i, row)] += full[i];
  }
}

// outer x axis x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void RequireAxis(const char* op, const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    Fail(ErrorKind::kConformance, std::string(op) + ": axis " +
                                      std::to_string(axis) +
                                      " out of range for shape " +
                                      ShapeToString(a.shape()));
  }
}

void RequireRank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    Fail(ErrorKind::kConformance, std::string(op) + ": expected rank " +
                                      std::to_string(rank) + ", got shape " +
                                      ShapeToString(a.shape()));
  }
}

Shape DropAxis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

template <typename F>
Tensor Unary(const char* op, const Tensor& a, F forward,
             std::function<void(const Tensor&, const Tensor&)> backward) {
  std::vector<double> out(a.numel());
  auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(x[i]);
  return MakeResult(op, a.shape(), std::move(out), {a},
                    [a, backward](const Tensor& y) { backward(a, y); });
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  const BinaryPlan plan = PlanBinary("add", a, b);
  std::vector<double> out(ShapeNumel(plan.shape));
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[Map(plan.a, i, plan.row)] + y[Map(plan.b, i, plan.row)];
  }
  return MakeResult("add", plan.shape, std::move(out), {a, b},
                    [a, b, plan](const Tensor& o) {
                      AccumulateReduced(a, plan.a, plan.row, o.grad());
                      AccumulateReduced(b, plan.b, plan.row, o.grad());
                    });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  const BinaryPlan plan = PlanBinary("sub", a, b);
  std::vector<double> out(ShapeNumel(plan.shape));
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[Map(plan.a, i, plan.row)] - y[Map(plan.b, i, plan.row)];
  }
  return MakeResult("sub", plan.shape, std::move(out), {a, b},
                    [a, b, plan](const Tensor& o) {
                      AccumulateReduced(a, plan.a, plan.row, o.grad());
                      if (!b.requires_grad()) return;
                      std::vector<double> neg(o.grad().begin(), o.grad().end());
                      for (double& v : neg) v = -v;
                      AccumulateReduced(b, plan.b, plan.row, neg);
                    });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  const BinaryPlan plan = PlanBinary("mul", a, b);
  std::vector<double> out(ShapeNumel(plan.shape));
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x[Map(plan.a, i, plan.row)] * y[Map(plan.b, i, plan.row)];
  }
  return MakeResult(
      "mul", plan.shape, std::move(out), {a, b}, [a, b, plan](const Tensor& o) {
        auto g = o.grad();
        auto x = a.values();
        auto y = b.values();
        std::vector<double> full(g.size());
        if (a.requires_grad()) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            full[i] = g[i] * y[Map(plan.b, i, plan.row)];
          }
          AccumulateReduced(a, plan.a, plan.row, full);
        }
        if (b.requires_grad()) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            full[i] = g[i] * x[Map(plan.a, i, plan.row)];
          }
          AccumulateReduced(b, plan.b, plan.row, full);
        }
      });
}

Tensor Scale(const Tensor& a, double factor) {
  return Unary(
      "scale", a, [factor](double v) { return v * factor; },
      [factor](const Tensor& in, const Tensor& out) {
        if (!in.requires_grad()) return;
        auto g = out.grad();
        auto dst = GradBuffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor;
      });
}

Tensor AddScalar(const Tensor& a, double value) {
  return Unary(
      "add_scalar", a, [value](double v) { return v + value; },
      [](const Tensor& in, const Tensor& out) {
        AccumulateGrad(in, out.grad());
      });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank("matmul", a, 2);
  RequireRank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) ShapeMismatch("matmul", a, b);
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m);
  MutMap(out.data(), n, m).noalias() =
      ConstMap(a.values().data(), n, k) * ConstMap(b.values().data(), k, m);
  return MakeResult("matmul", {n, m}, std::move(out), {a, b},
                    [a, b, n, k, m](const Tensor& o) {
                      ConstMap g(o.grad().data(), n, m);
                      if (a.requires_grad()) {
                        MutMap(GradBuffer(a).data(), n, k).noalias() +=
                            g * ConstMap(b.values().data(), k, m).transpose();
                      }
                      if (b.requires_grad()) {
                        MutMap(GradBuffer(b).data(), k, m).noalias() +=
                            ConstMap(a.values().data(), n, k).transpose() * g;
                      }
                    });
}

Tensor Transpose(const Tensor& a) {
  RequireRank("transpose", a, 2);
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  auto x = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x[i * m + j];
  }
  return MakeResult("transpose", {m, n}, std::move(out), {a},
                    [a, n, m](const Tensor& o) {
                      if (!a.requires_grad()) return;
                      auto g = o.grad();
                      auto dst = GradBuffer(a);
                      for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < m; ++j) {
                          dst[i * m + j] += g[j * n + i];
                        }
                      }
                    });
}

Tensor Relu(const Tensor& a) {
  return Unary(
      "relu", a, [](double v) { return v > 0.0 ? v : 0.0; },
      [](const Tensor& in, const Tensor& out) {
        if (!in.requires_grad()) return;
        auto g = out.grad();
        auto x = in.values();
        auto dst = GradBuffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) dst[i] += g[i];
        }
      });
}

Tensor Exp(const Tensor& a) {
  return Unary(
      "exp", a, [](double v) { return std::exp(v); },
      [](const Tensor& in, const Tensor& out) {
        if (!in.requires_grad()) return;
        auto g = out.grad();
        auto y = out.values();
        auto dst = GradBuffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
      });
}

Tensor Log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) {
      Fail(ErrorKind::kNumericDomain,
           "log of non-positive value " + std::to_string(v));
    }
  }
  return Unary(
      "log", a, [](double v) { return std::log(v); },
      [](const Tensor& in, const Tensor& out) {
        if (!in.requires_grad()) return;
        auto g = out.grad();
        auto x = in.values();
        auto dst = GradBuffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] / x[i];
      });
}

Tensor Sigmoid(const Tensor& a) {
  return Unary(
      "sigmoid", a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](const Tensor& in, const Tensor& out) {
        if (!in.requires_grad()) return;
        auto g = out.grad();
        auto y = out.values();
        auto dst = GradBuffer(in);
        for (std::size_t i = 0; i < g.size(); ++i) {
          dst[i] += g[i] * y[i] * (1.0 - y[i]);
        }
      });
}

Tensor Sum(const Tensor& a, std::size_t axis) {
  RequireAxis("sum", a, axis);
  const AxisSplit s = SplitAt(a.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto x = a.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.extent; ++k) {
      const double* src = x.data() + (o * s.extent + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return MakeResult("sum", DropAxis(a.shape(), axis), std::move(out), {a},
                    [a, s](const Tensor& y) {
                      if (!a.requires_grad()) return;
                      auto g = y.grad();
                      auto dst = GradBuffer(a);
                      for (std::size_t o = 0; o < s.outer; ++o) {
                        for (std::size_t k = 0; k < s.extent; ++k) {
                          double* d = dst.data() + (o * s.extent + k) * s.inner;
                          const double* src = g.data() + o * s.inner;
                          for (std::size_t i = 0; i < s.inner; ++i) d[i] += src[i];
                        }
                      }
                    });
}

Tensor Mean(const Tensor& a, std::size_t axis) {
  RequireAxis("mean", a, axis);
  const std::size_t n = a.dim(axis);
  if (n == 0) {
    Fail(ErrorKind::kNumericDomain, "mean over an empty axis");
  }
  return Scale(Sum(a, axis), 1.0 / static_cast<double>(n));
}

Tensor SumAll(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return MakeResult("sum_all", {}, {total}, {a}, [a](const Tensor& y) {
    if (!a.requires_grad()) return;
    const double g = y.grad()[0];
    for (double& d : GradBuffer(a)) d += g;
  });
}

Tensor Softmax(const Tensor& a) {
  if (a.rank() == 0) Fail(ErrorKind::kConformance, "softmax of a scalar");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  std::vector<double> out(a.numel());
  auto x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * c;
    double* y = out.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(in[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  return MakeResult("softmax", a.shape(), std::move(out), {a},
                    [a, c, rows](const Tensor& o) {
                      if (!a.requires_grad()) return;
                      auto g = o.grad();
                      auto y = o.values();
                      auto dst = GradBuffer(a);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < c; ++j) {
                          dot += g[r * c + j] * y[r * c + j];
                        }
                        for (std::size_t j = 0; j < c; ++j) {
                          dst[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
                        }
                      }
                    });
}

Tensor LogSoftmax(const Tensor& a) {
  if (a.rank() == 0) Fail(ErrorKind::kConformance, "log_softmax of a scalar");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  std::vector<double> out(a.numel());
  auto x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = in[j] - lse;
  }
  return MakeResult("log_softmax", a.shape(), std::move(out), {a},
                    [a, c, rows](const Tensor& o) {
                      if (!a.requires_grad()) return;
                      auto g = o.grad();
                      auto y = o.values();
                      auto dst = GradBuffer(a);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double gsum = 0.0;
                        for (std::size_t j = 0; j < c; ++j) gsum += g[r * c + j];
                        for (std::size_t j = 0; j < c; ++j) {
                          dst[r * c + j] +=
                              g[r * c + j] - std::exp(y[r * c + j]) * gsum;
                        }
                      }
                    });
}

Tensor L2Norm(const Tensor& a) {
  if (a.rank() == 0) Fail(ErrorKind::kConformance, "l2_norm of a scalar");
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(rows);
  auto x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += x[r * d + j] * x[r * d + j];
    out[r] = std::sqrt(ss);
  }
  return MakeResult("l2_norm", DropAxis(a.shape(), a.rank() - 1),
                    std::move(out), {a}, [a, d, rows](const Tensor& o) {
                      if (!a.requires_grad()) return;
                      auto g = o.grad();
                      auto n = o.values();
                      auto x = a.values();
                      auto dst = GradBuffer(a);
                      for (std::size_t r = 0; r < rows; ++r) {
                        if (n[r] == 0.0) continue;
                        for (std::size_t j = 0; j < d; ++j) {
                          dst[r * d + j] += g[r] * x[r * d + j] / n[r];
                        }
                      }
                    });
}

Tensor CosineSimilarity(const Tensor& a, const Tensor& b) {
  RequireRank("cosine_similarity", a, 2);
  RequireRank("cosine_similarity", b, 2);
  if (a.dim(1) != b.dim(1)) ShapeMismatch("cosine_similarity", a, b);
  const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  auto row_norms = [d](std::span<const double> v, std::size_t rows) {
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double ss = 0.0;
      for (std::size_t j = 0; j < d; ++j) ss += v[r * d + j] * v[r * d + j];
      norms[r] = std::sqrt(ss);
    }
    return norms;
  };
  std::vector<double> na = row_norms(a.values(), n);
  std::vector<double> nb = row_norms(b.values(), m);
  std::vector<double> out(n * m, 0.0);
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (na[i] == 0.0 || nb[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += x[i * d + k] * y[j * d + k];
      out[i * m + j] = dot / (na[i] * nb[j]);
    }
  }
  return MakeResult(
      "cosine_similarity", {n, m}, std::move(out), {a, b},
      [a, b, n, m, d, na = std::move(na), nb = std::move(nb)](const Tensor& o) {
        auto g = o.grad();
        auto cos = o.values();
        auto x = a.values();
        auto y = b.values();
        const bool ga = a.requires_grad();
        const bool gb = b.requires_grad();
        std::span<double> da = ga ? GradBuffer(a) : std::span<double>();
        std::span<double> db = gb ? GradBuffer(b) : std::span<double>();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            if (na[i] == 0.0 || nb[j] == 0.0) continue;
            const double gij = g[i * m + j];
            if (gij == 0.0) continue;
            const double inv = 1.0 / (na[i] * nb[j]);
            const double c = cos[i * m + j];
            if (ga) {
              const double self = c / (na[i] * na[i]);
              for (std::size_t k = 0; k < d; ++k) {
                da[i * d + k] += gij * (y[j * d + k] * inv - x[i * d + k] * self);
              }
            }
            if (gb) {
              const double self = c / (nb[j] * nb[j]);
              for (std::size_t k = 0; k < d; ++k) {
                db[j * d + k] += gij * (x[i * d + k] * inv - y[j * d + k] * self);
              }
            }
          }
        }
      });
}

Tensor Concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) Fail(ErrorKind::kConformance, "concat of no tensors");
  const Tensor& first = parts[0];
  RequireAxis("concat", first, axis);
  Shape shape = first.shape();
  shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.rank()) ShapeMismatch("concat", first, p);
    for (std::size_t i = 0; i < p.rank(); ++i) {
      if (i != axis && p.dim(i) != first.dim(i)) ShapeMismatch("concat", first, p);
    }
    shape[axis] += p.dim(axis);
  }
  const AxisSplit out_split = SplitAt(shape, axis);
  std::vector<double> out(ShapeNumel(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.dim(axis) * out_split.inner;
    auto src = p.values();
    for (std::size_t o = 0; o < out_split.outer; ++o) {
      std::copy_n(src.data() + o * block, block,
                  out.data() + o * out_split.extent * out_split.inner +
                      offset * out_split.inner);
    }
    offset += p.dim(axis);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return MakeResult(
      "concat", shape, std::move(out), inputs,
      [inputs, offsets, out_split, axis](const Tensor& y) {
        auto g = y.grad();
        for (std::size_t p = 0; p < inputs.size(); ++p) {
          const Tensor& part = inputs[p];
          if (!part.requires_grad()) continue;
          const std::size_t block = part.dim(axis) * out_split.inner;
          auto dst = GradBuffer(part);
          for (std::size_t o = 0; o < out_split.outer; ++o) {
            const double* src = g.data() + o * out_split.extent * out_split.inner +
                                offsets[p] * out_split.inner;
            double* d = dst.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) d[i] += src[i];
          }
        }
      });
}

Tensor IndexSelect(const Tensor& a, std::size_t axis,
                   std::span<const std::size_t> indices) {
  RequireAxis("index_select", a, axis);
  const AxisSplit s = SplitAt(a.shape(), axis);
  for (std::size_t idx : indices) {
    if (idx >= s.extent) {
      Fail(ErrorKind::kConformance,
           "index_select: index " + std::to_string(idx) +
               " out of range for shape " + ShapeToString(a.shape()));
    }
  }
  Shape shape = a.shape();
  shape[axis] = indices.size();
  std::vector<double> out(ShapeNumel(shape));
  auto x = a.values();
  const std::size_t n = indices.size();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < n; ++k) {
      std::copy_n(x.data() + (o * s.extent + indices[k]) * s.inner, s.inner,
                  out.data() + (o * n + k) * s.inner);
    }
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return MakeResult("index_select", shape, std::move(out), {a},
                    [a, s, idx = std::move(idx)](const Tensor& y) {
                      if (!a.requires_grad()) return;
                      auto g = y.grad();
                      auto dst = GradBuffer(a);
                      const std::size_t n = idx.size();
                      for (std::size_t o = 0; o < s.outer; ++o) {
                        for (std::size_t k = 0; k < n; ++k) {
                          double* d = dst.data() + (o * s.extent + idx[k]) * s.inner;
                          const double* src = g.data() + (o * n + k) * s.inner;
                          for (std::size_t i = 0; i < s.inner; ++i) d[i] += src[i];
                        }
                      }
                    });
}

}  // namespace accup::ops
