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

#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "accup/error.hpp"
#include "accup/ops.hpp"

namespace accup::ops {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

}  // namespace

BatchNormStats BatchNormStats::Identity(std::size_t channels) {
  BatchNormStats stats;
  stats.running_mean.assign(channels, 0.0);
  stats.running_var.assign(channels, 1.0);
  return stats;
}

Tensor Conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  if (input.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1 ||
      kernel.dim(1) != input.dim(1) || bias.dim(0) != kernel.dim(0)) {
    Fail(ErrorKind::kConformance,
         "conv1d: input " + ShapeToString(input.shape()) + ", kernel " +
             ShapeToString(kernel.shape()) + ", bias " +
             ShapeToString(bias.shape()) + " do not conform");
  }
  if (stride == 0) Fail(ErrorKind::kConformance, "conv1d: stride must be > 0");
  const std::size_t batch = input.dim(0), cin = input.dim(1), len = input.dim(2);
  const std::size_t cout = kernel.dim(0), width = kernel.dim(2);
  if (len + 2 * padding < width) {
    Fail(ErrorKind::kConformance,
         "conv1d: kernel width " + std::to_string(width) +
             " exceeds padded input length " + std::to_string(len + 2 * padding));
  }
  const std::size_t lout = (len + 2 * padding - width) / stride + 1;
  const std::size_t rows = cin * width;
  const std::size_t cols_n = batch * lout;

  // im2col: row (ci, kk), column (b, t).
  auto cols = std::make_shared<std::vector<double>>(rows * cols_n, 0.0);
  auto x = input.values();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t kk = 0; kk < width; ++kk) {
      double* row = cols->data() + (ci * width + kk) * cols_n;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * cin + ci) * len;
        for (std::size_t t = 0; t < lout; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + kk) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
            row[b * lout + t] = src[pos];
          }
        }
      }
    }
  }
  RowMatrix prod = ConstMap(kernel.values().data(), cout, rows) *
                   ConstMap(cols->data(), rows, cols_n);
  std::vector<double> out(batch * cout * lout);
  auto bv = bias.values();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* dst = out.data() + (b * cout + co) * lout;
      const double* src = prod.data() + co * cols_n + b * lout;
      for (std::size_t t = 0; t < lout; ++t) dst[t] = src[t] + bv[co];
    }
  }

  return MakeResult(
      "conv1d", {batch, cout, lout}, std::move(out), {input, kernel, bias},
      [=](const Tensor& y) {
        auto g = y.grad();
        // Gradient in (co, (b, t)) layout to match the im2col product.
        RowMatrix gmat(cout, cols_n);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* src = g.data() + (b * cout + co) * lout;
            double* dst = gmat.data() + co * cols_n + b * lout;
            for (std::size_t t = 0; t < lout; ++t) dst[t] = src[t];
          }
        }
        if (kernel.requires_grad()) {
          MutMap(GradBuffer(kernel).data(), cout, rows).noalias() +=
              gmat * ConstMap(cols->data(), rows, cols_n).transpose();
        }
        if (bias.requires_grad()) {
          auto db = GradBuffer(bias);
          for (std::size_t co = 0; co < cout; ++co) db[co] += gmat.row(co).sum();
        }
        if (input.requires_grad()) {
          RowMatrix dcols =
              ConstMap(kernel.values().data(), cout, rows).transpose() * gmat;
          auto dx = GradBuffer(input);
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t kk = 0; kk < width; ++kk) {
              const double* row = dcols.data() + (ci * width + kk) * cols_n;
              for (std::size_t b = 0; b < batch; ++b) {
                double* dst = dx.data() + (b * cin + ci) * len;
                for (std::size_t t = 0; t < lout; ++t) {
                  const std::ptrdiff_t pos =
                      static_cast<std::ptrdiff_t>(t * stride + kk) -
                      static_cast<std::ptrdiff_t>(padding);
                  if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) {
                    dst[pos] += row[b * lout + t];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor MaxPool1d(const Tensor& input, std::size_t width, std::size_t stride) {
  if (input.rank() != 3) {
    Fail(ErrorKind::kConformance,
         "max_pool1d: expected B x C x L, got " + ShapeToString(input.shape()));
  }
  if (width == 0 || stride == 0) {
    Fail(ErrorKind::kConformance, "max_pool1d: width and stride must be > 0");
  }
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  if (len < width) {
    Fail(ErrorKind::kConformance, "max_pool1d: window " + std::to_string(width) +
                                      " wider than length " + std::to_string(len));
  }
  const std::size_t lout = (len - width) / stride + 1;
  std::vector<double> out(batch * ch * lout);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  auto x = input.values();
  for (std::size_t r = 0; r < batch * ch; ++r) {
    const double* src = x.data() + r * len;
    for (std::size_t t = 0; t < lout; ++t) {
      std::size_t best = t * stride;
      for (std::size_t j = best + 1; j < t * stride + width; ++j) {
        if (src[j] > src[best]) best = j;
      }
      out[r * lout + t] = src[best];
      (*argmax)[r * lout + t] = r * len + best;
    }
  }
  return MakeResult("max_pool1d", {batch, ch, lout}, std::move(out), {input},
                    [input, argmax](const Tensor& y) {
                      if (!input.requires_grad()) return;
                      auto g = y.grad();
                      auto dx = GradBuffer(input);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        dx[(*argmax)[i]] += g[i];
                      }
                    });
}

Tensor BatchNorm1d(const Tensor& input, const Tensor& gamma,
                   const Tensor& beta, BatchNormStats& stats,
                   BatchNormMode mode) {
  if (input.rank() != 3 || gamma.rank() != 1 || beta.rank() != 1 ||
      gamma.dim(0) != input.dim(1) || beta.dim(0) != input.dim(1) ||
      stats.running_mean.size() != input.dim(1) ||
      stats.running_var.size() != input.dim(1)) {
    Fail(ErrorKind::kConformance,
         "batch_norm1d: input " + ShapeToString(input.shape()) + ", gamma " +
             ShapeToString(gamma.shape()) + ", beta " +
             ShapeToString(beta.shape()) + " do not conform");
  }
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  const std::size_t count = batch * len;
  if (mode == BatchNormMode::kBatchStats && count < 2) {
    Fail(ErrorKind::kContract,
         "batch_norm1d: degenerate batch, B*L = " + std::to_string(count) +
             " < 2 in batch-statistics mode");
  }
  auto x = input.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> mean(ch), inv_std(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    if (mode == BatchNormMode::kBatchStats) {
      double sum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * ch + c) * len;
        for (std::size_t t = 0; t < len; ++t) sum += src[t];
      }
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * ch + c) * len;
        for (std::size_t t = 0; t < len; ++t) sq += (src[t] - mu) * (src[t] - mu);
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + stats.eps);
      const double unbiased = sq / static_cast<double>(count - 1);
      stats.running_mean[c] =
          (1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mu;
      stats.running_var[c] =
          (1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * unbiased;
    } else {
      mean[c] = stats.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(stats.running_var[c] + stats.eps);
    }
  }
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t base = (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        const double n = (x[base + t] - mean[c]) * inv_std[c];
        (*xhat)[base + t] = n;
        out[base + t] = gv[c] * n + bv[c];
      }
    }
  }
  const bool batch_stats = mode == BatchNormMode::kBatchStats;
  return MakeResult(
      "batch_norm1d", input.shape(), std::move(out), {input, gamma, beta},
      [=, inv_std = std::move(inv_std)](const Tensor& y) {
        auto g = y.grad();
        auto gv = gamma.values();
        if (gamma.requires_grad() || beta.requires_grad()) {
          std::vector<double> dg(ch, 0.0), db(ch, 0.0);
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < ch; ++c) {
              const std::size_t base = (b * ch + c) * len;
              for (std::size_t t = 0; t < len; ++t) {
                dg[c] += g[base + t] * (*xhat)[base + t];
                db[c] += g[base + t];
              }
            }
          }
          AccumulateGrad(gamma, dg);
          AccumulateGrad(beta, db);
        }
        if (!input.requires_grad()) return;
        auto dx = GradBuffer(input);
        const double n = static_cast<double>(count);
        for (std::size_t c = 0; c < ch; ++c) {
          if (!batch_stats) {
            for (std::size_t b = 0; b < batch; ++b) {
              const std::size_t base = (b * ch + c) * len;
              for (std::size_t t = 0; t < len; ++t) {
                dx[base + t] += g[base + t] * gv[c] * inv_std[c];
              }
            }
            continue;
          }
          // dx = gamma * inv_std / N * (N dy - sum dy - xhat sum(dy xhat))
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * ch + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              sum_dy += g[base + t];
              sum_dy_xhat += g[base + t] * (*xhat)[base + t];
            }
          }
          const double k = gv[c] * inv_std[c] / n;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * ch + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              dx[base + t] +=
                  k * (n * g[base + t] - sum_dy - (*xhat)[base + t] * sum_dy_xhat);
            }
          }
        }
      });
}

}  // namespace accup::ops
