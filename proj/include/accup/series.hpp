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

#ifndef ACCUP_SERIES_HPP_
#define ACCUP_SERIES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "accup/tensor.hpp"

namespace accup {

// B x C x L block of real-valued signals, channel-then-time row-major.
// Carries no labels; this is the only batch type adaptation accepts.
class SignalBatch {
 public:
  SignalBatch() = default;
  SignalBatch(std::size_t batch, std::size_t channels, std::size_t length);
  SignalBatch(std::size_t batch, std::size_t channels, std::size_t length,
              std::vector<double> values);

  std::size_t batch() const { return batch_; }
  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  bool empty() const { return batch_ == 0; }

  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  std::span<const double> sample(std::size_t i) const;
  std::span<double> mutable_sample(std::size_t i);
  std::span<const double> series(std::size_t i, std::size_t c) const;
  std::span<double> mutable_series(std::size_t i, std::size_t c);

  // Rows [begin, end) as a new batch.
  SignalBatch Slice(std::size_t begin, std::size_t end) const;
  SignalBatch Select(std::span<const std::size_t> rows) const;

  Tensor ToTensor() const;

  bool operator==(const SignalBatch&) const = default;

 private:
  std::size_t batch_ = 0;
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> values_;
};

// Signals with integer class labels in 0..num_classes-1. Deliberately not
// convertible to SignalBatch: callers must pass .signals explicitly, which
// keeps labels out of every adaptation entry point.
struct LabeledSet {
  SignalBatch signals;
  std::vector<std::int32_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  LabeledSet Slice(std::size_t begin, std::size_t end) const;
};

// Consecutive batches of at most batch_size rows, in order.
std::vector<SignalBatch> SplitIntoBatches(const SignalBatch& all,
                                          std::size_t batch_size);

}  // namespace accup

#endif  // ACCUP_SERIES_HPP_
