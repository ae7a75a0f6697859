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

// The ACCUP building blocks: augmentation ensemble, entropy-filtered
// prototypes over a memorized support set, entropy comparison and the
// augmented contrastive clustering loss.
//
// Entropies are in nats and are always taken of softmax(row), whatever the
// row holds (classifier logits or prototype probabilities).

#ifndef ACCUP_METHOD_HPP_
#define ACCUP_METHOD_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "accup/snapshot.hpp"
#include "accup/tensor.hpp"

namespace accup {

// H(x) = -sum_c softmax(x)_c ln softmax(x)_c. Throws kNumericDomain on a
// non-finite input.
double ShannonEntropy(std::span<const double> logits);
// Per-row entropies of a B x C matrix.
std::vector<double> RowEntropies(const Tensor& logits);
// Row-wise argmax, earliest index on ties.
std::vector<std::int32_t> RowArgmax(const Tensor& logits);
std::int32_t Argmax(std::span<const double> row);

// Differentiable mean over rows of H(row).
Tensor MeanEntropy(const Tensor& logits);

struct EnsembleOutput {
  Tensor features;  // f_ens
  Tensor logits;    // p_ens
};

// f_ens = w f_raw + (1 - w) f_aug and likewise for the logits. Throws
// kConfig unless 0 < w < 1.
EnsembleOutput Ensemble(const Tensor& f_raw, const Tensor& p_raw,
                        const Tensor& f_aug, const Tensor& p_aug, double w);
// Same with a one-element weight tensor (the learnable mode).
EnsembleOutput Ensemble(const Tensor& f_raw, const Tensor& p_raw,
                        const Tensor& f_aug, const Tensor& p_aug,
                        const Tensor& w);

enum class EntryOrigin : std::uint8_t { kClassifier = 0, kStream = 1 };

struct SupportEntry {
  std::vector<double> feature;
  std::vector<double> logits;
  double entropy = 0.0;
  std::int32_t pseudo_label = 0;
  EntryOrigin origin = EntryOrigin::kStream;
};

// Per-class memory of past test features. Starts with one entry per class
// holding the classifier weight row (one-hot logits, entropy 0); grows by
// one entry per streamed sample and never evicts.
class SupportSet {
 public:
  SupportSet() = default;
  SupportSet(std::size_t num_classes, std::size_t feature_dim);

  // Seeds one classifier-origin entry per row of `weight` (C x F).
  static SupportSet FromClassifier(const Tensor& weight);

  // Appends row i of features/logits under argmax(logits row i), with the
  // given entropies.
  void Append(const Tensor& features, const Tensor& logits,
              std::span<const double> entropies);
  void Add(SupportEntry entry);

  std::size_t num_classes() const { return classes_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<SupportEntry>& entries(std::size_t c) const {
    return classes_[c];
  }
  std::size_t total_size() const;

  // Snapshot of the set: tensors "class<c>.features" (n x F),
  // "class<c>.logits" (n x C), "class<c>.entropy" (n),
  // "class<c>.origin" (n, 0 classifier / 1 stream).
  std::vector<NamedTensor> ToNamedTensors() const;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<std::vector<SupportEntry>> classes_;
};

struct PrototypeSet {
  Tensor mu;                        // C x F
  std::vector<std::size_t> counts;  // retained entries per class
};

// Per class keeps the min(K, n) lowest-entropy entries (stable: earlier
// entries win ties) and averages their features. Throws kConfig on K = 0.
PrototypeSet ComputePrototypes(const SupportSet& set, std::size_t k);

// softmax_c(eta * cos(f, mu_c)). Differentiable in f, prototypes constant.
// Throws kConfig unless eta > 0.
Tensor PrototypeLogits(const Tensor& features, const PrototypeSet& protos,
                       double eta);

struct EntropyComparison {
  std::vector<double> p_out;  // B x C, row-major
  std::vector<double> h_ens;
  std::vector<double> h_proto;
  std::vector<bool> took_proto;
  std::vector<std::int32_t> labels;  // argmax of p_out
};

// Row-wise: p_ens when H_ens < H_proto, else p_proto.
EntropyComparison EntropyCompare(const Tensor& p_ens, const Tensor& p_proto);
// Same selection, but returns row indices into concat(a, b) picking the
// lower-entropy row of each pair (ties to b).
std::vector<std::size_t> LowerEntropyRows(const Tensor& a, const Tensor& b);

enum class AnchorScope { kAll, kRawOnly };

const char* AnchorScopeName(AnchorScope scope);
AnchorScope ParseAnchorScope(const std::string& name);

// Contrastive clustering loss from an N x N cosine matrix over the combined
// views. For anchor i, pos(i) are the other members sharing its label and
// neg(i) the members with a different label:
//
//   L_i = -1/|pos(i)| sum_{j in pos(i)} ln( exp(s_ij / tau) /
//                                           sum_{k in neg(i)} exp(s_ik / tau) )
//
// Anchors with an empty pos or neg set contribute 0. With kRawOnly only the
// first `raw_count` members act as anchors. Returns sum_i L_i.
Tensor ContrastiveFromCosines(const Tensor& cosines,
                              std::span<const std::int32_t> labels, double tau,
                              AnchorScope scope = AnchorScope::kAll,
                              std::size_t raw_count = 0);

// The same loss on view logits (N x C): s_ij = cos(p_i, p_j). N = 2B with
// raw views first.
Tensor ContrastiveLoss(const Tensor& view_logits,
                       std::span<const std::int32_t> labels, double tau,
                       AnchorScope scope = AnchorScope::kAll);

}  // namespace accup

#endif  // ACCUP_METHOD_HPP_
