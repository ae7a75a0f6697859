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

#include "accup/series.hpp"

#include <algorithm>
#include <string>

#include "accup/error.hpp"

namespace accup {

SignalBatch::SignalBatch(std::size_t batch, std::size_t channels,
                         std::size_t length)
    : batch_(batch),
      channels_(channels),
      length_(length),
      values_(batch * channels * length, 0.0) {}

SignalBatch::SignalBatch(std::size_t batch, std::size_t channels,
                         std::size_t length, std::vector<double> values)
    : batch_(batch), channels_(channels), length_(length), values_(std::move(values)) {
  if (values_.size() != batch * channels * length) {
    Fail(ErrorKind::kConformance,
         "signal batch " + ShapeToString({batch, channels, length}) + " holds " +
             std::to_string(batch * channels * length) + " values, got " +
             std::to_string(values_.size()));
  }
}

std::span<const double> SignalBatch::sample(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * channels_ * length_,
                                                  channels_ * length_);
}

std::span<double> SignalBatch::mutable_sample(std::size_t i) {
  return std::span<double>(values_).subspan(i * channels_ * length_,
                                            channels_ * length_);
}

std::span<const double> SignalBatch::series(std::size_t i, std::size_t c) const {
  return std::span<const double>(values_).subspan((i * channels_ + c) * length_,
                                                  length_);
}

std::span<double> SignalBatch::mutable_series(std::size_t i, std::size_t c) {
  return std::span<double>(values_).subspan((i * channels_ + c) * length_,
                                            length_);
}

SignalBatch SignalBatch::Slice(std::size_t begin, std::size_t end) const {
  Require(begin <= end && end <= batch_, ErrorKind::kContract,
          "slice [" + std::to_string(begin) + "," + std::to_string(end) +
              ") outside batch of " + std::to_string(batch_));
  const std::size_t stride = channels_ * length_;
  return SignalBatch(end - begin, channels_, length_,
                     std::vector<double>(values_.begin() + begin * stride,
                                         values_.begin() + end * stride));
}

SignalBatch SignalBatch::Select(std::span<const std::size_t> rows) const {
  SignalBatch out(rows.size(), channels_, length_);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Require(rows[k] < batch_, ErrorKind::kContract, "row index out of range");
    auto src = sample(rows[k]);
    std::copy(src.begin(), src.end(), out.mutable_sample(k).begin());
  }
  return out;
}

Tensor SignalBatch::ToTensor() const {
  return Tensor::FromVector({batch_, channels_, length_}, values_);
}

LabeledSet LabeledSet::Slice(std::size_t begin, std::size_t end) const {
  LabeledSet out;
  out.signals = signals.Slice(begin, end);
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  out.num_classes = num_classes;
  return out;
}

std::vector<SignalBatch> SplitIntoBatches(const SignalBatch& all,
                                          std::size_t batch_size) {
  Require(batch_size > 0, ErrorKind::kConfig, "batch size must be positive");
  std::vector<SignalBatch> out;
  for (std::size_t b = 0; b < all.batch(); b += batch_size) {
    out.push_back(all.Slice(b, std::min(all.batch(), b + batch_size)));
  }
  return out;
}

}  // namespace accup
