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

// Source model g = classifier . encoder: three conv blocks
// (conv1d -> batch norm -> relu -> max pool), global average pooling over
// time, and a linear classifier.

#ifndef ACCUP_BACKBONE_HPP_
#define ACCUP_BACKBONE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "accup/ops.hpp"
#include "accup/random.hpp"
#include "accup/series.hpp"
#include "accup/snapshot.hpp"
#include "accup/tensor.hpp"

namespace accup {

inline constexpr std::size_t kEncoderBlocks = 3;

struct EncoderConfig {
  std::size_t in_channels = 1;
  std::array<std::size_t, kEncoderBlocks> filters = {64, 128, 128};
  std::array<std::size_t, kEncoderBlocks> kernel_sizes = {8, 5, 3};
  std::array<std::size_t, kEncoderBlocks> strides = {1, 1, 1};
  std::array<std::size_t, kEncoderBlocks> pool_widths = {2, 2, 2};

  // Features after global pooling.
  std::size_t feature_dim() const { return filters.back(); }
  // Conv padding of block i: kernel_size / 2.
  std::size_t padding(std::size_t block) const { return kernel_sizes[block] / 2; }

  void Validate() const;
  // Time extent after the last block for an input of length `length`;
  // throws kConformance when some block would run out of samples.
  std::size_t OutputLength(std::size_t length) const;

  bool operator==(const EncoderConfig&) const = default;
};

// Which conv blocks (conv + its batch norm) take optimizer steps.
struct LayerMask {
  std::array<bool, kEncoderBlocks> blocks = {true, true, true};

  bool any() const { return blocks[0] || blocks[1] || blocks[2]; }
  bool operator==(const LayerMask&) const = default;
};

struct EncoderBlock {
  Tensor conv_weight;  // Cout x Cin x k
  Tensor conv_bias;    // Cout
  Tensor bn_gamma;     // Cout
  Tensor bn_beta;      // Cout
  ops::BatchNormStats bn_stats;
};

// Parameters of the encoder and the linear classifier. Copies are deep.
class Model {
 public:
  Model() = default;
  // PyTorch-style uniform(+-1/sqrt(fan_in)) init for conv and linear layers,
  // identity batch norm.
  Model(const EncoderConfig& config, std::size_t num_classes,
        std::size_t input_length, SeedStream& rng);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const EncoderConfig& config() const { return config_; }
  std::size_t num_classes() const { return num_classes_; }
  // Series length the model was built for; adaptation rejects others.
  std::size_t input_length() const { return input_length_; }

  std::array<EncoderBlock, kEncoderBlocks>& blocks() { return blocks_; }
  const std::array<EncoderBlock, kEncoderBlocks>& blocks() const { return blocks_; }
  const Tensor& classifier_weight() const { return classifier_weight_; }  // C x F
  const Tensor& classifier_bias() const { return classifier_bias_; }      // C

  // Conv kernels, conv biases and BN affine parameters of the masked blocks.
  std::vector<Tensor> EncoderParameters(const LayerMask& mask) const;
  // BN gamma/beta of every block.
  std::vector<Tensor> NormParameters() const;
  std::vector<Tensor> ClassifierParameters() const;
  std::vector<Tensor> AllParameters() const;
  // Sets requires_grad on exactly `trainable`, clears it everywhere else.
  void SetTrainable(std::span<const Tensor> trainable);

  std::vector<NamedTensor> ToNamedTensors() const;
  static Model FromNamedTensors(const EncoderConfig& config,
                                std::size_t num_classes,
                                std::size_t input_length,
                                std::span<const NamedTensor> tensors);

 private:
  EncoderConfig config_;
  std::size_t num_classes_ = 0;
  std::size_t input_length_ = 0;
  std::array<EncoderBlock, kEncoderBlocks> blocks_;
  Tensor classifier_weight_;
  Tensor classifier_bias_;
};

struct ForwardOutput {
  Tensor features;  // B x F
  Tensor logits;    // B x C
};

// f_theta. kBatchStats refreshes the running statistics as a side effect.
Tensor Encode(Model& model, const SignalBatch& x, ops::BatchNormMode mode);
// h_phi: features . W^T + bias.
Tensor Classify(const Model& model, const Tensor& features);
ForwardOutput Forward(Model& model, const SignalBatch& x,
                      ops::BatchNormMode mode);
// Running-statistics inference, no graph, model untouched.
ForwardOutput Infer(const Model& model, const SignalBatch& x);

// Mean cross-entropy of logits (B x C) against integer labels.
Tensor CrossEntropy(const Tensor& logits, std::span<const std::int32_t> labels);

struct PretrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  Model model;
  std::vector<double> epoch_losses;  // mean minibatch loss per epoch
  double train_accuracy = 0.0;       // running-stats inference after training
};

// Source-domain ERM with cross-entropy and Adam, BN in batch-stats mode.
PretrainResult PretrainSource(Model model, const LabeledSet& train,
                              const PretrainConfig& config);

// Snapshot plus "<path>.json" sidecar with the encoder config, class count
// and input length.
void SaveModel(const Model& model, const std::string& path);
Model LoadModel(const std::string& path);
std::vector<std::uint8_t> EncodeModel(const Model& model);
// SHA-256 of the encoded snapshot.
std::string ModelHash(const Model& model);

}  // namespace accup

#endif  // ACCUP_BACKBONE_HPP_
