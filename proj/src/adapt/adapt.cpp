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

#include "accup/adapt.hpp"

#include <chrono>
#include <cmath>
#include <utility>

#include "accup/error.hpp"
#include "accup/ops.hpp"

namespace accup {
namespace {

std::vector<double> ToVector(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

double GradNorm(const std::vector<Tensor>& params) {
  double ss = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) ss += g * g;
  }
  return std::sqrt(ss);
}

ops::BatchNormMode ModeFor(bool batch_stats) {
  return batch_stats ? ops::BatchNormMode::kBatchStats
                     : ops::BatchNormMode::kRunningStats;
}

}  // namespace

const char* WeightModeName(WeightMode mode) {
  return mode == WeightMode::kFixed ? "fixed" : "learnable";
}

WeightMode ParseWeightMode(const std::string& name) {
  if (name == "fixed") return WeightMode::kFixed;
  if (name == "learnable") return WeightMode::kLearnable;
  Fail(ErrorKind::kConfig, "unknown ensemble weight mode '" + name + "'");
}

const char* FallbackLogitsName(FallbackLogits f) {
  return f == FallbackLogits::kEnsemble ? "ensemble" : "prototype";
}

FallbackLogits ParseFallbackLogits(const std::string& name) {
  if (name == "ensemble") return FallbackLogits::kEnsemble;
  if (name == "prototype") return FallbackLogits::kPrototype;
  Fail(ErrorKind::kConfig, "unknown fallback logits '" + name + "'");
}

void AccupConfig::Validate() const {
  Require(k >= 1, ErrorKind::kConfig, "K must be >= 1");
  Require(eta > 0.0 && std::isfinite(eta), ErrorKind::kConfig,
          "eta must be positive");
  Require(tau > 0.0 && std::isfinite(tau), ErrorKind::kConfig,
          "tau must be positive");
  Require(w > 0.0 && w < 1.0, ErrorKind::kConfig,
          "ensemble weight w must lie in (0, 1)");
  Require(lr >= 0.0 && std::isfinite(lr), ErrorKind::kConfig,
          "learning rate must be finite and non-negative");
  Require(layers.any(), ErrorKind::kConfig,
          "at least one encoder block must be trainable");
  augment.Validate();
}

const char* StrategyName(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kAccup:
      return "accup";
    case StrategyKind::kSource:
      return "source";
    case StrategyKind::kBnStats:
      return "bn-stats";
    case StrategyKind::kTent:
      return "tent";
    case StrategyKind::kPseudoLabel:
      return "pseudo-label";
  }
  return "unknown";
}

StrategyKind ParseStrategy(const std::string& name) {
  for (StrategyKind k :
       {StrategyKind::kAccup, StrategyKind::kSource, StrategyKind::kBnStats,
        StrategyKind::kTent, StrategyKind::kPseudoLabel}) {
    if (name == StrategyName(k)) return k;
  }
  if (name == "bn") return StrategyKind::kBnStats;
  if (name == "pl") return StrategyKind::kPseudoLabel;
  Fail(ErrorKind::kConfig, "unknown strategy '" + name + "'");
}

void StreamAdapter::CheckBatch(const Model& model,
                               const SignalBatch& batch) const {
  Require(!batch.empty(), ErrorKind::kContract, "empty batch in the stream");
  Require(batch.channels() == model.config().in_channels &&
              batch.length() == model.input_length(),
          ErrorKind::kConformance,
          "batch of " + std::to_string(batch.channels()) + " x " +
              std::to_string(batch.length()) +
              " series does not match the model's " +
              std::to_string(model.config().in_channels) + " x " +
              std::to_string(model.input_length()));
}

AccupAdapter::AccupAdapter(const Model& model, const AccupConfig& config,
                           std::uint64_t seed)
    : model_(model), config_(config), augment_seeds_(seed) {
  config_.Validate();
  support_ = SupportSet::FromClassifier(model_.classifier_weight());
  trainable_ = model_.EncoderParameters(config_.layers);
  model_.SetTrainable(trainable_);
  if (config_.weight_mode == WeightMode::kLearnable) {
    weight_logit_ =
        Tensor::Scalar(std::log(config_.w) - std::log1p(-config_.w));
    weight_logit_.set_requires_grad(true);
    trainable_.push_back(weight_logit_);
  }
  adam_ = Adam(trainable_, AdamConfig{.lr = config_.lr});
}

double AccupAdapter::ensemble_weight() const {
  if (config_.weight_mode == WeightMode::kFixed) return config_.w;
  return 1.0 / (1.0 + std::exp(-weight_logit_.item()));
}

AccupAdapter::Views AccupAdapter::ForwardViews(const SignalBatch& raw,
                                               const SignalBatch& aug) {
  const auto mode = ModeFor(config_.use_batch_stats);
  Views v;
  v.raw = Forward(model_, raw, mode);
  // Without augmentation the augmented view is the raw view itself.
  v.aug = config_.use_augmentation ? Forward(model_, aug, mode) : v.raw;
  if (config_.weight_mode == WeightMode::kLearnable) {
    v.ensemble = Ensemble(v.raw.features, v.raw.logits, v.aug.features,
                          v.aug.logits, ops::Sigmoid(weight_logit_));
  } else {
    v.ensemble = Ensemble(v.raw.features, v.raw.logits, v.aug.features,
                          v.aug.logits, config_.w);
  }
  return v;
}

AccupAdapter::Prediction AccupAdapter::Predict(const Views& views,
                                               SupportSet& support) const {
  Prediction p;
  const Tensor f_ens = views.ensemble.features.Detach();
  const Tensor p_ens = views.ensemble.logits.Detach();
  p.h_ens = RowEntropies(p_ens);
  support.Append(f_ens, p_ens, p.h_ens);
  p.p_out = ToVector(p_ens);
  p.took_proto.assign(p_ens.dim(0), false);
  if (config_.use_prototypes) {
    p.targets.prototypes = ComputePrototypes(support, config_.k);
    const Tensor p_proto =
        PrototypeLogits(f_ens, p.targets.prototypes, config_.eta);
    p.p_proto = ToVector(p_proto);
    if (config_.use_entropy_comparison) {
      EntropyComparison cmp = EntropyCompare(p_ens, p_proto);
      p.p_out = std::move(cmp.p_out);
      p.took_proto = std::move(cmp.took_proto);
    } else if (config_.fallback == FallbackLogits::kPrototype) {
      p.p_out = p.p_proto;
      p.took_proto.assign(p_ens.dim(0), true);
    }
  }
  const std::size_t c = p_ens.dim(1);
  for (std::size_t i = 0; i < p_ens.dim(0); ++i) {
    p.targets.labels.push_back(
        Argmax(std::span<const double>(p.p_out).subspan(i * c, c)));
  }
  return p;
}

Tensor AccupAdapter::Loss(const Views& views, const Targets& targets) const {
  if (!config_.use_contrast) return Tensor::Scalar(0.0);
  auto fuse = [&](const ForwardOutput& view) {
    if (!config_.use_prototypes) return view.logits;
    Tensor proto =
        PrototypeLogits(view.features, targets.prototypes, config_.eta);
    if (config_.use_entropy_comparison) {
      const std::vector<std::size_t> rows = LowerEntropyRows(view.logits, proto);
      const std::vector<Tensor> both = {view.logits, proto};
      return ops::IndexSelect(ops::Concat(both, 0), 0, rows);
    }
    return config_.fallback == FallbackLogits::kPrototype ? proto : view.logits;
  };
  const std::vector<Tensor> parts = {fuse(views.raw), fuse(views.aug)};
  std::vector<std::int32_t> labels = targets.labels;
  labels.insert(labels.end(), targets.labels.begin(), targets.labels.end());
  return ContrastiveLoss(ops::Concat(parts, 0), labels, config_.tau,
                         config_.anchors);
}

AccupAdapter::Targets AccupAdapter::ComputeTargets(const SignalBatch& raw,
                                                   const SignalBatch& aug) {
  CheckBatch(model_, raw);
  CheckBatch(model_, aug);
  Graph scratch;
  GraphScope scope(scratch);
  SupportSet support = support_;
  return Predict(ForwardViews(raw, aug), support).targets;
}

Tensor AccupAdapter::Objective(const SignalBatch& raw, const SignalBatch& aug,
                               const Targets& targets) {
  CheckBatch(model_, raw);
  CheckBatch(model_, aug);
  return Loss(ForwardViews(raw, aug), targets);
}

BatchResult AccupAdapter::AdaptBatch(const SignalBatch& batch) {
  CheckBatch(model_, batch);
  SeedStream draw = augment_seeds_.Fork();
  const SignalBatch aug =
      config_.use_augmentation ? Augment(batch, config_.augment, draw) : batch;

  Graph graph;
  Tensor loss;
  Prediction pred;
  Views views;
  {
    GraphScope scope(graph);
    views = ForwardViews(batch, aug);
    pred = Predict(views, support_);
    loss = Loss(views, pred.targets);
  }

  BatchResult result;
  result.predictions = pred.targets.labels;
  result.p_out = std::move(pred.p_out);
  result.p_ens = ToVector(views.ensemble.logits);
  result.p_proto = std::move(pred.p_proto);
  result.took_proto = std::move(pred.took_proto);
  result.raw_view.assign(batch.values().begin(), batch.values().end());
  result.aug_view.assign(aug.values().begin(), aug.values().end());
  result.loss = loss.item();

  adam_.ZeroGrad();
  Backward(loss, graph);
  result.grad_norm = GradNorm(trainable_);
  adam_.Step();
  ++steps_;
  return result;
}

BatchResult SourceAdapter::AdaptBatch(const SignalBatch& batch) {
  CheckBatch(model_, batch);
  ForwardOutput out = Infer(model_, batch);
  BatchResult result;
  result.predictions = RowArgmax(out.logits);
  result.p_out = ToVector(out.logits);
  ++steps_;
  return result;
}

BatchResult BnStatsAdapter::AdaptBatch(const SignalBatch& batch) {
  CheckBatch(model_, batch);
  ForwardOutput out = Forward(model_, batch, ops::BatchNormMode::kBatchStats);
  BatchResult result;
  result.predictions = RowArgmax(out.logits);
  result.p_out = ToVector(out.logits);
  ++steps_;
  return result;
}

NormStepAdapter::NormStepAdapter(StrategyKind kind, const Model& model,
                                 const BaselineConfig& config)
    : kind_(kind), model_(model) {
  Require(kind == StrategyKind::kTent || kind == StrategyKind::kPseudoLabel,
          ErrorKind::kConfig, "norm-step adapter is for tent or pseudo-label");
  Require(config.lr >= 0.0 && std::isfinite(config.lr), ErrorKind::kConfig,
          "learning rate must be finite and non-negative");
  std::vector<Tensor> params = model_.NormParameters();
  model_.SetTrainable(params);
  adam_ = Adam(std::move(params), AdamConfig{.lr = config.lr});
}

BatchResult NormStepAdapter::AdaptBatch(const SignalBatch& batch) {
  CheckBatch(model_, batch);
  Graph graph;
  Tensor loss;
  BatchResult result;
  {
    GraphScope scope(graph);
    ForwardOutput out = Forward(model_, batch, ops::BatchNormMode::kBatchStats);
    result.predictions = RowArgmax(out.logits);
    result.p_out = ToVector(out.logits);
    loss = kind_ == StrategyKind::kTent
               ? MeanEntropy(out.logits)
               : CrossEntropy(out.logits, result.predictions);
  }
  result.loss = loss.item();
  adam_.ZeroGrad();
  Backward(loss, graph);
  result.grad_norm = GradNorm(adam_.params());
  adam_.Step();
  ++steps_;
  return result;
}

std::unique_ptr<StreamAdapter> MakeAdapter(const Model& model,
                                           const StrategyConfig& config,
                                           std::uint64_t seed) {
  switch (config.kind) {
    case StrategyKind::kAccup:
      return std::make_unique<AccupAdapter>(model, config.accup, seed);
    case StrategyKind::kSource:
      return std::make_unique<SourceAdapter>(model);
    case StrategyKind::kBnStats:
      return std::make_unique<BnStatsAdapter>(model);
    case StrategyKind::kTent:
    case StrategyKind::kPseudoLabel:
      return std::make_unique<NormStepAdapter>(config.kind, model,
                                               config.baseline);
  }
  Fail(ErrorKind::kConfig, "unknown strategy");
}

std::vector<std::int32_t> RunRecord::Predictions() const {
  std::vector<std::int32_t> out;
  for (const auto& b : batch_predictions) out.insert(out.end(), b.begin(), b.end());
  return out;
}

RunRecord RunStream(StreamAdapter& adapter,
                    const std::vector<SignalBatch>& stream) {
  Require(!stream.empty(), ErrorKind::kContract, "cannot adapt on an empty stream");
  RunRecord record;
  record.strategy = StrategyName(adapter.kind());
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    BatchResult r;
    try {
      r = adapter.AdaptBatch(stream[i]);
    } catch (const Error& e) {
      Fail(e.kind(), "batch " + std::to_string(i) + " of " +
                         std::to_string(stream.size()) + ": " + e.what());
    }
    record.batch_losses.push_back(r.loss);
    record.batch_predictions.push_back(std::move(r.predictions));
  }
  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return record;
}

}  // namespace accup
