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

#include "accup/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "accup/binary_io.hpp"
#include "accup/error.hpp"
#include "accup/optim.hpp"
#include "json.hpp"

namespace accup {
namespace {

Tensor UniformTensor(Shape shape, double bound, SeedStream& rng) {
  std::vector<double> values(ShapeNumel(shape));
  for (double& v : values) v = rng.Uniform(-bound, bound);
  return Tensor::FromVector(std::move(shape), std::move(values));
}

Tensor CloneLike(const Tensor& t) {
  if (!t.defined()) return t;
  Tensor out = t.Clone();
  out.set_requires_grad(t.requires_grad());
  return out;
}

std::string BlockPrefix(std::size_t i) {
  return "encoder.block" + std::to_string(i) + ".";
}

Tensor StatsTensor(const std::vector<double>& values) {
  return Tensor::FromVector({values.size()}, values);
}

// Shared forward over the encoder. `stats` points at the statistics the
// batch-norm layers read and (in batch mode) write.
Tensor EncodeWith(const Model& model,
                  std::array<ops::BatchNormStats, kEncoderBlocks>& stats,
                  const SignalBatch& x, ops::BatchNormMode mode) {
  const EncoderConfig& config = model.config();
  Require(x.channels() == config.in_channels, ErrorKind::kConformance,
          "input has " + std::to_string(x.channels()) +
              " channels, encoder expects " +
              std::to_string(config.in_channels));
  Require(!x.empty(), ErrorKind::kContract, "cannot encode an empty batch");
  config.OutputLength(x.length());
  Tensor h = x.ToTensor();
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const EncoderBlock& block = model.blocks()[i];
    h = ops::Conv1d(h, block.conv_weight, block.conv_bias, config.strides[i],
                    config.padding(i));
    h = ops::BatchNorm1d(h, block.bn_gamma, block.bn_beta, stats[i], mode);
    h = ops::Relu(h);
    h = ops::MaxPool1d(h, config.pool_widths[i], config.pool_widths[i]);
  }
  return ops::Mean(h, 2);
}

}  // namespace

void EncoderConfig::Validate() const {
  Require(in_channels >= 1, ErrorKind::kConfig, "in_channels must be >= 1");
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const std::string b = "block " + std::to_string(i) + ": ";
    Require(filters[i] >= 1, ErrorKind::kConfig, b + "filters must be >= 1");
    Require(kernel_sizes[i] >= 1, ErrorKind::kConfig,
            b + "kernel size must be >= 1");
    Require(strides[i] >= 1, ErrorKind::kConfig, b + "stride must be >= 1");
    Require(pool_widths[i] >= 1, ErrorKind::kConfig,
            b + "pool width must be >= 1");
  }
}

std::size_t EncoderConfig::OutputLength(std::size_t length) const {
  std::size_t l = length;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const std::size_t padded = l + 2 * padding(i);
    if (padded < kernel_sizes[i]) {
      Fail(ErrorKind::kConformance,
           "series of length " + std::to_string(length) +
               " is too short for conv block " + std::to_string(i));
    }
    l = (padded - kernel_sizes[i]) / strides[i] + 1;
    if (l < pool_widths[i]) {
      Fail(ErrorKind::kConformance,
           "series of length " + std::to_string(length) +
               " is too short for pooling in block " + std::to_string(i));
    }
    l = (l - pool_widths[i]) / pool_widths[i] + 1;
  }
  return l;
}

Model::Model(const EncoderConfig& config, std::size_t num_classes,
             std::size_t input_length, SeedStream& rng)
    : config_(config), num_classes_(num_classes), input_length_(input_length) {
  config_.Validate();
  Require(num_classes >= 2, ErrorKind::kConfig, "need at least two classes");
  config_.OutputLength(input_length);
  std::size_t cin = config_.in_channels;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const std::size_t cout = config_.filters[i];
    const std::size_t k = config_.kernel_sizes[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k));
    EncoderBlock& block = blocks_[i];
    block.conv_weight = UniformTensor({cout, cin, k}, bound, rng);
    block.conv_bias = UniformTensor({cout}, bound, rng);
    block.bn_gamma = Tensor::Full({cout}, 1.0);
    block.bn_beta = Tensor::Zeros({cout});
    block.bn_stats = ops::BatchNormStats::Identity(cout);
    cin = cout;
  }
  const std::size_t f = config_.feature_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(f));
  classifier_weight_ = UniformTensor({num_classes, f}, bound, rng);
  classifier_bias_ = UniformTensor({num_classes}, bound, rng);
}

Model::Model(const Model& other)
    : config_(other.config_),
      num_classes_(other.num_classes_),
      input_length_(other.input_length_) {
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const EncoderBlock& src = other.blocks_[i];
    EncoderBlock& dst = blocks_[i];
    dst.conv_weight = CloneLike(src.conv_weight);
    dst.conv_bias = CloneLike(src.conv_bias);
    dst.bn_gamma = CloneLike(src.bn_gamma);
    dst.bn_beta = CloneLike(src.bn_beta);
    dst.bn_stats = src.bn_stats;
  }
  classifier_weight_ = CloneLike(other.classifier_weight_);
  classifier_bias_ = CloneLike(other.classifier_bias_);
}

Model& Model::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

std::vector<Tensor> Model::EncoderParameters(const LayerMask& mask) const {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    if (!mask.blocks[i]) continue;
    const EncoderBlock& b = blocks_[i];
    out.insert(out.end(), {b.conv_weight, b.conv_bias, b.bn_gamma, b.bn_beta});
  }
  return out;
}

std::vector<Tensor> Model::NormParameters() const {
  std::vector<Tensor> out;
  for (const auto& b : blocks_) out.insert(out.end(), {b.bn_gamma, b.bn_beta});
  return out;
}

std::vector<Tensor> Model::ClassifierParameters() const {
  return {classifier_weight_, classifier_bias_};
}

std::vector<Tensor> Model::AllParameters() const {
  std::vector<Tensor> out = EncoderParameters(LayerMask{});
  out.push_back(classifier_weight_);
  out.push_back(classifier_bias_);
  return out;
}

void Model::SetTrainable(std::span<const Tensor> trainable) {
  for (Tensor& p : AllParameters()) {
    bool on = false;
    for (const Tensor& t : trainable) on = on || p.SameStorage(t);
    p.set_requires_grad(on);
  }
}

std::vector<NamedTensor> Model::ToNamedTensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    const EncoderBlock& b = blocks_[i];
    const std::string p = BlockPrefix(i);
    out.push_back({p + "conv.weight", b.conv_weight});
    out.push_back({p + "conv.bias", b.conv_bias});
    out.push_back({p + "bn.gamma", b.bn_gamma});
    out.push_back({p + "bn.beta", b.bn_beta});
    out.push_back({p + "bn.running_mean", StatsTensor(b.bn_stats.running_mean)});
    out.push_back({p + "bn.running_var", StatsTensor(b.bn_stats.running_var)});
  }
  out.push_back({"classifier.weight", classifier_weight_});
  out.push_back({"classifier.bias", classifier_bias_});
  return out;
}

Model Model::FromNamedTensors(const EncoderConfig& config,
                              std::size_t num_classes,
                              std::size_t input_length,
                              std::span<const NamedTensor> tensors) {
  SeedStream unused(0);
  Model model(config, num_classes, input_length, unused);
  auto take = [&](const std::string& name, const Shape& shape) {
    for (const auto& nt : tensors) {
      if (nt.name != name) continue;
      if (nt.tensor.shape() != shape) {
        Fail(ErrorKind::kFormat, "snapshot tensor '" + name + "' has shape " +
                                     ShapeToString(nt.tensor.shape()) +
                                     ", expected " + ShapeToString(shape));
      }
      return nt.tensor.Clone();
    }
    Fail(ErrorKind::kFormat, "snapshot is missing tensor '" + name + "'");
  };
  std::size_t expected = 2;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    EncoderBlock& b = model.blocks_[i];
    const std::string p = BlockPrefix(i);
    b.conv_weight = take(p + "conv.weight", b.conv_weight.shape());
    b.conv_bias = take(p + "conv.bias", b.conv_bias.shape());
    b.bn_gamma = take(p + "bn.gamma", b.bn_gamma.shape());
    b.bn_beta = take(p + "bn.beta", b.bn_beta.shape());
    const Shape c = {config.filters[i]};
    const Tensor mean = take(p + "bn.running_mean", c);
    const Tensor var = take(p + "bn.running_var", c);
    b.bn_stats.running_mean.assign(mean.values().begin(), mean.values().end());
    b.bn_stats.running_var.assign(var.values().begin(), var.values().end());
    expected += 6;
  }
  model.classifier_weight_ =
      take("classifier.weight", model.classifier_weight_.shape());
  model.classifier_bias_ = take("classifier.bias", model.classifier_bias_.shape());
  Require(tensors.size() == expected, ErrorKind::kFormat,
          "snapshot holds " + std::to_string(tensors.size()) +
              " tensors, expected " + std::to_string(expected));
  return model;
}

Tensor Encode(Model& model, const SignalBatch& x, ops::BatchNormMode mode) {
  std::array<ops::BatchNormStats, kEncoderBlocks> stats;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    stats[i] = std::move(model.blocks()[i].bn_stats);
  }
  Tensor out;
  try {
    out = EncodeWith(model, stats, x, mode);
  } catch (...) {
    for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
      model.blocks()[i].bn_stats = std::move(stats[i]);
    }
    throw;
  }
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    model.blocks()[i].bn_stats = std::move(stats[i]);
  }
  return out;
}

Tensor Classify(const Model& model, const Tensor& features) {
  Require(features.rank() == 2 && features.dim(1) == model.config().feature_dim(),
          ErrorKind::kConformance,
          "classifier expects B x " +
              std::to_string(model.config().feature_dim()) +
              " features, got " + ShapeToString(features.shape()));
  Tensor logits =
      ops::MatMul(features, ops::Transpose(model.classifier_weight()));
  return ops::Add(logits, model.classifier_bias());
}

ForwardOutput Forward(Model& model, const SignalBatch& x,
                      ops::BatchNormMode mode) {
  ForwardOutput out;
  out.features = Encode(model, x, mode);
  out.logits = Classify(model, out.features);
  return out;
}

ForwardOutput Infer(const Model& model, const SignalBatch& x) {
  std::array<ops::BatchNormStats, kEncoderBlocks> stats;
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    stats[i] = model.blocks()[i].bn_stats;
  }
  ForwardOutput out;
  out.features = EncodeWith(model, stats, x, ops::BatchNormMode::kRunningStats);
  out.logits = Classify(model, out.features);
  return out;
}

Tensor CrossEntropy(const Tensor& logits, std::span<const std::int32_t> labels) {
  Require(logits.rank() == 2 && logits.dim(0) == labels.size(),
          ErrorKind::kConformance,
          "cross-entropy needs B x C logits with B labels, got " +
              ShapeToString(logits.shape()) + " and " +
              std::to_string(labels.size()) + " labels");
  Require(!labels.empty(), ErrorKind::kContract,
          "cross-entropy of an empty batch");
  const std::size_t b = logits.dim(0);
  const std::size_t c = logits.dim(1);
  std::vector<double> onehot(b * c, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    Require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c,
            ErrorKind::kLabelRange,
            "label " + std::to_string(labels[i]) + " outside 0.." +
                std::to_string(c - 1));
    onehot[i * c + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  Tensor picked = ops::Mul(ops::LogSoftmax(logits),
                           Tensor::FromVector({b, c}, std::move(onehot)));
  return ops::Scale(ops::SumAll(picked), -1.0 / static_cast<double>(b));
}

PretrainResult PretrainSource(Model model, const LabeledSet& train,
                              const PretrainConfig& config) {
  Require(train.size() > 0, ErrorKind::kContract,
          "pretraining needs a non-empty dataset");
  Require(train.signals.batch() == train.size(), ErrorKind::kConformance,
          "label count does not match the number of series");
  Require(config.batch_size >= 1, ErrorKind::kConfig,
          "batch size must be >= 1");
  Require(config.lr >= 0.0 && std::isfinite(config.lr), ErrorKind::kConfig,
          "learning rate must be finite and non-negative");
  for (std::int32_t y : train.labels) {
    Require(y >= 0 && static_cast<std::size_t>(y) < model.num_classes(),
            ErrorKind::kLabelRange,
            "label " + std::to_string(y) + " outside 0.." +
                std::to_string(model.num_classes() - 1));
  }

  std::vector<Tensor> params = model.AllParameters();
  model.SetTrainable(params);
  Adam adam(params, AdamConfig{.lr = config.lr});
  SeedStream rng(config.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  PretrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      SignalBatch x = train.signals.Select(rows);
      std::vector<std::int32_t> y;
      for (std::size_t r : rows) y.push_back(train.labels[r]);

      Graph graph;
      Tensor loss;
      {
        GraphScope scope(graph);
        ForwardOutput out = Forward(model, x, ops::BatchNormMode::kBatchStats);
        loss = CrossEntropy(out.logits, y);
      }
      adam.ZeroGrad();
      Backward(loss, graph);
      adam.Step();
      total += loss.item();
      ++batches;
    }
    result.epoch_losses.push_back(total / static_cast<double>(batches));
  }
  model.SetTrainable({});

  std::size_t correct = 0;
  for (std::size_t start = 0; start < train.size(); start += 256) {
    const std::size_t end = std::min(train.size(), start + 256);
    ForwardOutput out = Infer(model, train.signals.Slice(start, end));
    const std::size_t c = model.num_classes();
    auto v = out.logits.values();
    for (std::size_t i = 0; i < end - start; ++i) {
      auto row = v.subspan(i * c, c);
      const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
      if (pred == train.labels[start + i]) ++correct;
    }
  }
  result.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(train.size());
  result.model = std::move(model);
  return result;
}

namespace {

nlohmann::json SidecarJson(const Model& model) {
  const EncoderConfig& c = model.config();
  nlohmann::json j;
  j["format"] = "accup-model";
  j["version"] = 1;
  j["in_channels"] = c.in_channels;
  j["filters"] = c.filters;
  j["kernel_sizes"] = c.kernel_sizes;
  j["strides"] = c.strides;
  j["pool_widths"] = c.pool_widths;
  j["feature_dim"] = c.feature_dim();
  j["num_classes"] = model.num_classes();
  j["input_length"] = model.input_length();
  j["bn_momentum"] = model.blocks()[0].bn_stats.momentum;
  j["bn_eps"] = model.blocks()[0].bn_stats.eps;
  return j;
}

}  // namespace

std::vector<std::uint8_t> EncodeModel(const Model& model) {
  return EncodeSnapshot(model.ToNamedTensors());
}

std::string ModelHash(const Model& model) {
  return Sha256Hex(EncodeModel(model));
}

void SaveModel(const Model& model, const std::string& path) {
  WriteSnapshot(path, model.ToNamedTensors());
  const std::string text = SidecarJson(model).dump(2) + "\n";
  WriteFileBytes(path + ".json",
                 std::span<const std::uint8_t>(
                     reinterpret_cast<const std::uint8_t*>(text.data()),
                     text.size()));
}

Model LoadModel(const std::string& path) {
  const auto raw = ReadFileBytes(path + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, path + ".json: " + e.what());
  }
  EncoderConfig config;
  std::size_t num_classes = 0;
  std::size_t input_length = 0;
  try {
    Require(j.at("format") == "accup-model" && j.at("version") == 1,
            ErrorKind::kFormat, path + ".json: not an accup model sidecar");
    config.in_channels = j.at("in_channels").get<std::size_t>();
    config.filters = j.at("filters").get<decltype(config.filters)>();
    config.kernel_sizes = j.at("kernel_sizes").get<decltype(config.kernel_sizes)>();
    config.strides = j.at("strides").get<decltype(config.strides)>();
    config.pool_widths = j.at("pool_widths").get<decltype(config.pool_widths)>();
    num_classes = j.at("num_classes").get<std::size_t>();
    input_length = j.at("input_length").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, path + ".json: " + e.what());
  }
  try {
    config.Validate();
  } catch (const Error& e) {
    Fail(ErrorKind::kFormat, path + ".json: " + e.what());
  }
  const auto tensors = ReadSnapshot(path);
  return Model::FromNamedTensors(config, num_classes, input_length, tensors);
}

}  // namespace accup
