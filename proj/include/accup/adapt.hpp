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

// Online single-pass adaptation: the ACCUP loop and the reference
// strategies (source, bn-stats, tent, pseudo-label).
//
// Every strategy consumes unlabeled SignalBatch values in stream order,
// records its prediction for a batch before any parameter update, then takes
// exactly one optimizer step (a no-op for the non-learning strategies).

#ifndef ACCUP_ADAPT_HPP_
#define ACCUP_ADAPT_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "accup/augment.hpp"
#include "accup/backbone.hpp"
#include "accup/method.hpp"
#include "accup/optim.hpp"
#include "accup/random.hpp"
#include "accup/series.hpp"

namespace accup {

enum class WeightMode { kFixed, kLearnable };
// What p_out is when prototypes are on but entropy comparison is off.
enum class FallbackLogits { kEnsemble, kPrototype };

const char* WeightModeName(WeightMode mode);
WeightMode ParseWeightMode(const std::string& name);
const char* FallbackLogitsName(FallbackLogits f);
FallbackLogits ParseFallbackLogits(const std::string& name);

struct AccupConfig {
  std::size_t k = 10;
  double eta = 20.0;
  double tau = 0.7;
  double w = 0.5;
  WeightMode weight_mode = WeightMode::kFixed;
  AugmentSpec augment = AugmentSpec::MagnitudeWarp();
  double lr = 3e-4;
  LayerMask layers;
  AnchorScope anchors = AnchorScope::kAll;
  FallbackLogits fallback = FallbackLogits::kEnsemble;

  bool use_prototypes = true;
  bool use_entropy_comparison = true;
  bool use_augmentation = true;
  bool use_contrast = true;
  // Batch-norm layers normalize with current-batch statistics (and refresh
  // the running ones) during adaptation.
  bool use_batch_stats = true;

  // Throws kConfig.
  void Validate() const;

  bool operator==(const AccupConfig&) const = default;
};

// Everything observable about one adapted batch.
struct BatchResult {
  std::vector<std::int32_t> predictions;
  std::vector<double> p_out;  // B x C, row-major
  double loss = 0.0;
  // ACCUP only.
  std::vector<double> p_ens;
  std::vector<double> p_proto;
  std::vector<bool> took_proto;
  std::vector<double> raw_view;  // augmented input equals raw when these match
  std::vector<double> aug_view;
  double grad_norm = 0.0;  // L2 norm of the trainable gradients before the step
};

enum class StrategyKind { kAccup, kSource, kBnStats, kTent, kPseudoLabel };

const char* StrategyName(StrategyKind kind);
StrategyKind ParseStrategy(const std::string& name);

class StreamAdapter {
 public:
  virtual ~StreamAdapter() = default;

  virtual StrategyKind kind() const = 0;
  // Consumes one batch: predicts, then takes one step. Rejects batches whose
  // channel count or length differ from the model's.
  virtual BatchResult AdaptBatch(const SignalBatch& batch) = 0;

  virtual const Model& model() const = 0;
  std::size_t steps() const { return steps_; }

 protected:
  void CheckBatch(const Model& model, const SignalBatch& batch) const;
  std::size_t steps_ = 0;
};

class AccupAdapter : public StreamAdapter {
 public:
  // `seed` drives the per-batch augmentation draws.
  AccupAdapter(const Model& model, const AccupConfig& config,
               std::uint64_t seed);

  StrategyKind kind() const override { return StrategyKind::kAccup; }
  BatchResult AdaptBatch(const SignalBatch& batch) override;
  const Model& model() const override { return model_; }

  const SupportSet& support() const { return support_; }
  const AccupConfig& config() const { return config_; }
  // Current ensemble weight (the sigmoid of the logit in learnable mode).
  double ensemble_weight() const;
  const std::vector<Tensor>& trainable() const { return trainable_; }

  // Quantities the loss treats as constants: prototypes (built from the
  // support set plus this batch) and the shared pseudo-labels.
  struct Targets {
    PrototypeSet prototypes;
    std::vector<std::int32_t> labels;
  };

  // The adaptation objective of a batch with an explicit augmented view,
  // split so that it can be differentiated numerically: Targets() fixes the
  // constants without mutating the adapter, Objective() rebuilds the loss
  // under the caller's graph. Both refresh batch-norm running statistics
  // when batch statistics are in use.
  Targets ComputeTargets(const SignalBatch& raw, const SignalBatch& aug);
  Tensor Objective(const SignalBatch& raw, const SignalBatch& aug,
                   const Targets& targets);

 private:
  struct Views {
    ForwardOutput raw;
    ForwardOutput aug;
    EnsembleOutput ensemble;
  };
  struct Prediction {
    Targets targets;
    std::vector<double> h_ens;
    std::vector<double> p_proto;
    std::vector<bool> took_proto;
    std::vector<double> p_out;
  };

  Views ForwardViews(const SignalBatch& raw, const SignalBatch& aug);
  // Appends the ensemble rows to `support` and derives p_out.
  Prediction Predict(const Views& views, SupportSet& support) const;
  Tensor Loss(const Views& views, const Targets& targets) const;

  Model model_;
  AccupConfig config_;
  SeedStream augment_seeds_;
  SupportSet support_;
  Tensor weight_logit_;  // learnable mode only
  std::vector<Tensor> trainable_;
  Adam adam_;
};

struct BaselineConfig {
  double lr = 1e-3;
};

// Frozen model, running statistics.
class SourceAdapter : public StreamAdapter {
 public:
  explicit SourceAdapter(const Model& model) : model_(model) {}
  StrategyKind kind() const override { return StrategyKind::kSource; }
  BatchResult AdaptBatch(const SignalBatch& batch) override;
  const Model& model() const override { return model_; }

 private:
  Model model_;
};

// Current-batch normalization statistics, no parameter update.
class BnStatsAdapter : public StreamAdapter {
 public:
  explicit BnStatsAdapter(const Model& model) : model_(model) {}
  StrategyKind kind() const override { return StrategyKind::kBnStats; }
  BatchResult AdaptBatch(const SignalBatch& batch) override;
  const Model& model() const override { return model_; }

 private:
  Model model_;
};

// Batch-statistics forward followed by one Adam step on the batch-norm
// affine parameters: mean prediction entropy (tent) or cross-entropy against
// the argmax labels (pseudo-label).
class NormStepAdapter : public StreamAdapter {
 public:
  NormStepAdapter(StrategyKind kind, const Model& model,
                  const BaselineConfig& config);
  StrategyKind kind() const override { return kind_; }
  BatchResult AdaptBatch(const SignalBatch& batch) override;
  const Model& model() const override { return model_; }

 private:
  StrategyKind kind_;
  Model model_;
  Adam adam_;
};

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kAccup;
  AccupConfig accup;
  BaselineConfig baseline;
};

std::unique_ptr<StreamAdapter> MakeAdapter(const Model& model,
                                           const StrategyConfig& config,
                                           std::uint64_t seed);

struct RunRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<double> batch_losses;
  std::vector<std::vector<std::int32_t>> batch_predictions;
  double macro_f1 = 0.0;  // filled by the evaluator from held-back labels
  double wall_ms = 0.0;

  std::vector<std::int32_t> Predictions() const;
};

// Folds AdaptBatch over the stream in order. Throws kContract on an empty
// stream; numeric failures are rethrown with the batch index attached.
RunRecord RunStream(StreamAdapter& adapter,
                    const std::vector<SignalBatch>& stream);

}  // namespace accup

#endif  // ACCUP_ADAPT_HPP_
