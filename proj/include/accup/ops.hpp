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

// Differentiable primitives.
//
// Binary elementwise ops accept equal shapes, a one-element operand
// (scalar broadcast) or a rank-1 operand whose length equals the other
// operand's last extent (row broadcast). Nothing else broadcasts.

#ifndef ACCUP_OPS_HPP_
#define ACCUP_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "accup/tensor.hpp"

namespace accup::ops {

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
Tensor AddScalar(const Tensor& a, double value);

// (N x K) . (K x M) -> (N x M).
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);

Tensor Relu(const Tensor& a);
Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Sigmoid(const Tensor& a);

// Reductions drop the reduced axis.
Tensor Sum(const Tensor& a, std::size_t axis);
Tensor Mean(const Tensor& a, std::size_t axis);
Tensor SumAll(const Tensor& a);

// Over the last axis, with max subtraction.
Tensor Softmax(const Tensor& a);
Tensor LogSoftmax(const Tensor& a);

// Euclidean norm over the last axis (drops it).
Tensor L2Norm(const Tensor& a);

// Pairwise cosine similarity of the rows of a (N x D) and b (M x D),
// giving N x M. A pair involving a zero-norm row has similarity 0 and
// passes no gradient.
Tensor CosineSimilarity(const Tensor& a, const Tensor& b);

Tensor Concat(std::span<const Tensor> parts, std::size_t axis);
Tensor IndexSelect(const Tensor& a, std::size_t axis,
                   std::span<const std::size_t> indices);

// Cross-correlation (no kernel flip). input B x Cin x L, kernel
// Cout x Cin x k, bias Cout. Lout = floor((L + 2 pad - k) / stride) + 1.
Tensor Conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding);

// Max over non-overlapping-or-strided windows along time; ties pick the
// earliest element. input B x C x L.
Tensor MaxPool1d(const Tensor& input, std::size_t width, std::size_t stride);

enum class BatchNormMode { kBatchStats, kRunningStats };

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormStats Identity(std::size_t channels);
};

// input B x C x L. In kBatchStats mode normalizes with the biased batch
// variance and folds the batch mean / unbiased variance into `stats` with
// `momentum`; kRunningStats normalizes with the stored statistics and leaves
// them untouched. Output = gamma * normalized + beta.
Tensor BatchNorm1d(const Tensor& input, const Tensor& gamma,
                   const Tensor& beta, BatchNormStats& stats,
                   BatchNormMode mode);

}  // namespace accup::ops

#endif  // ACCUP_OPS_HPP_
