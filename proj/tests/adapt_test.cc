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

#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include "accup/error.hpp"
#include "accup/method.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace accup {
namespace {

using testing::GradCheck;
using testing::RandomBatch;
using testing::TinyModel;

constexpr std::size_t kChannels = 2;
constexpr std::size_t kClasses = 3;
constexpr std::size_t kLength = 24;

std::vector<SignalBatch> Stream(std::size_t batches, std::size_t size,
                                std::uint64_t seed) {
  SeedStream rng(seed);
  std::vector<SignalBatch> out;
  for (std::size_t i = 0; i < batches; ++i) {
    out.push_back(RandomBatch(size, kChannels, kLength, rng));
  }
  return out;
}

std::vector<std::vector<double>> Snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

std::vector<std::vector<double>> AllValues(const Model& m) {
  return Snapshot(m.AllParameters());
}

AccupConfig AllOff() {
  AccupConfig c;
  c.use_prototypes = false;
  c.use_entropy_comparison = false;
  c.use_augmentation = false;
  c.use_contrast = false;
  c.use_batch_stats = false;
  return c;
}

// Batches reach adapters as plain signals: there is no field through which
// a label could travel.
template <typename T>
concept HasLabels = requires(T t) { t.labels; };
static_assert(!HasLabels<SignalBatch>);
static_assert(HasLabels<LabeledSet>);
static_assert(std::is_same_v<decltype(&StreamAdapter::AdaptBatch),
                             BatchResult (StreamAdapter::*)(const SignalBatch&)>);

TEST(AccupAdapterTest, ZeroLearningRateKeepsParameters) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 1);
  AccupConfig c;
  c.lr = 0.0;
  AccupAdapter a(model, c, 7);
  const BatchResult r = a.AdaptBatch(Stream(1, 6, 2)[0]);
  EXPECT_EQ(r.predictions.size(), 6u);
  EXPECT_EQ(Snapshot(a.trainable()), Snapshot(model.EncoderParameters(c.layers)));
}

TEST(AccupAdapterTest, RepeatedBatchMovesParameters) {
  // This model spreads the batch over two pseudo-labels, so the loss has
  // both positives and negatives.
  const Model model = TinyModel(kChannels, kClasses, kLength, 5);
  AccupConfig c;
  c.lr = 3e-4;
  AccupAdapter a(model, c, 7);
  const SignalBatch x = Stream(1, 8, 4)[0];
  ASSERT_GT(a.AdaptBatch(x).loss, 0.0);
  const auto after_first = Snapshot(a.trainable());
  a.AdaptBatch(x);
  const auto after_second = Snapshot(a.trainable());
  double delta = 0.0;
  for (std::size_t k = 0; k < after_first.size(); ++k) {
    for (std::size_t i = 0; i < after_first[k].size(); ++i) {
      delta += std::abs(after_second[k][i] - after_first[k][i]);
    }
  }
  EXPECT_GT(delta, 0.0);
  EXPECT_EQ(a.steps(), 2u);
}

TEST(AccupAdapterTest, PaperLearningRatesAccepted) {
  for (double lr : {3e-4, 1e-5}) {
    AccupConfig c;
    c.lr = lr;
    EXPECT_NO_THROW(c.Validate());
  }
  AccupConfig bad;
  bad.lr = -1.0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = AccupConfig();
  bad.tau = 0.0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = AccupConfig();
  bad.layers.blocks = {false, false, false};
  EXPECT_THROW(bad.Validate(), Error);
}

TEST(AccupAdapterTest, OneStepPerBatch) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 5);
  AccupAdapter a(model, AccupConfig(), 1);
  RunStream(a, Stream(5, 4, 6));
  EXPECT_EQ(a.steps(), 5u);
}

TEST(AccupAdapterTest, SupportGrowsByBatchSize) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 7);
  AccupAdapter a(model, AccupConfig(), 1);
  EXPECT_EQ(a.support().total_size(), kClasses);
  a.AdaptBatch(Stream(1, 5, 8)[0]);
  EXPECT_EQ(a.support().total_size(), kClasses + 5);
}

TEST(AccupAdapterTest, PrefixCausal) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 9);
  const auto stream = Stream(6, 4, 10);
  AccupAdapter full(model, AccupConfig(), 3);
  const RunRecord all = RunStream(full, stream);
  for (std::size_t t = 1; t < stream.size(); ++t) {
    AccupAdapter part(model, AccupConfig(), 3);
    const RunRecord prefix = RunStream(
        part, std::vector<SignalBatch>(stream.begin(), stream.begin() + t));
    for (std::size_t b = 0; b < t; ++b) {
      EXPECT_EQ(prefix.batch_predictions[b], all.batch_predictions[b]) << t;
      EXPECT_EQ(prefix.batch_losses[b], all.batch_losses[b]);
    }
  }
}

TEST(AccupAdapterTest, AllSwitchesOffReproducesSource) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 11);
  AccupConfig c = AllOff();
  c.lr = 0.0;
  const auto stream = Stream(4, 5, 12);
  AccupAdapter a(model, c, 1);
  SourceAdapter s(model);
  const RunRecord ra = RunStream(a, stream);
  const RunRecord rs = RunStream(s, stream);
  EXPECT_EQ(ra.batch_predictions, rs.batch_predictions);
  AccupAdapter again(model, c, 1);
  SourceAdapter s2(model);
  for (const auto& x : stream) {
    EXPECT_EQ(again.AdaptBatch(x).p_out, s2.AdaptBatch(x).p_out);
  }
}

TEST(AccupAdapterTest, WithoutContrastNothingMoves) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 13);
  AccupConfig c;
  c.use_contrast = false;
  AccupAdapter a(model, c, 1);
  for (const auto& x : Stream(3, 6, 14)) {
    const BatchResult r = a.AdaptBatch(x);
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.grad_norm, 0.0);
  }
  EXPECT_EQ(Snapshot(a.trainable()), Snapshot(model.EncoderParameters(c.layers)));
  EXPECT_EQ(a.steps(), 3u);
}

TEST(AccupAdapterTest, WithoutPrototypesOutputIsEnsemble) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 15);
  AccupConfig c;
  c.use_prototypes = false;
  c.use_entropy_comparison = false;
  AccupAdapter a(model, c, 1);
  for (const auto& x : Stream(3, 6, 16)) {
    const BatchResult r = a.AdaptBatch(x);
    EXPECT_EQ(r.p_out, r.p_ens);
    for (bool t : r.took_proto) EXPECT_FALSE(t);
  }
}

TEST(AccupAdapterTest, WithoutEntropyComparisonFallbackIsUsed) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 17);
  for (auto fallback : {FallbackLogits::kEnsemble, FallbackLogits::kPrototype}) {
    AccupConfig c;
    c.use_entropy_comparison = false;
    c.fallback = fallback;
    AccupAdapter a(model, c, 1);
    for (const auto& x : Stream(2, 6, 18)) {
      const BatchResult r = a.AdaptBatch(x);
      EXPECT_EQ(r.p_out, fallback == FallbackLogits::kEnsemble ? r.p_ens : r.p_proto);
    }
  }
}

TEST(AccupAdapterTest, EntropyComparisonPicksLowerEntropyRow) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 19);
  AccupAdapter a(model, AccupConfig(), 1);
  const BatchResult r = a.AdaptBatch(Stream(1, 8, 20)[0]);
  for (std::size_t i = 0; i < 8; ++i) {
    const std::span<const double> ens(r.p_ens.data() + i * kClasses, kClasses);
    const std::span<const double> proto(r.p_proto.data() + i * kClasses, kClasses);
    const std::span<const double> out(r.p_out.data() + i * kClasses, kClasses);
    EXPECT_EQ(r.took_proto[i], !(ShannonEntropy(ens) < ShannonEntropy(proto)));
    EXPECT_EQ(ShannonEntropy(out), std::min(ShannonEntropy(ens), ShannonEntropy(proto)));
    EXPECT_EQ(r.predictions[i], Argmax(out));
  }
}

TEST(AccupAdapterTest, WithoutAugmentationViewsAreIdentical) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 21);
  AccupConfig c;
  c.use_augmentation = false;
  AccupAdapter a(model, c, 1);
  const BatchResult r = a.AdaptBatch(Stream(1, 4, 22)[0]);
  EXPECT_EQ(r.raw_view, r.aug_view);
  AccupAdapter b(model, AccupConfig(), 1);
  const BatchResult rb = b.AdaptBatch(Stream(1, 4, 22)[0]);
  EXPECT_NE(rb.raw_view, rb.aug_view);
}

TEST(AccupAdapterTest, LearnableWeightStartsAtHalf) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 23);
  AccupConfig c;
  c.weight_mode = WeightMode::kLearnable;
  c.w = 0.3;
  AccupAdapter a(model, c, 1);
  EXPECT_NEAR(a.ensemble_weight(), 0.3, 1e-15);
  RunStream(a, Stream(2, 4, 24));
  EXPECT_TRUE(std::isfinite(a.ensemble_weight()));
}

TEST(AccupAdapterTest, ObjectiveGradientMatchesFiniteDifferences) {
  // Model whose two samples get different pseudo-labels.
  const Model model = TinyModel(kChannels, 2, 16, 38);
  AccupConfig c;
  c.k = 2;
  c.eta = 5.0;
  c.tau = 0.7;
  AccupAdapter a(model, c, 1);
  SeedStream rng(26);
  const SignalBatch raw = RandomBatch(2, kChannels, 16, rng);
  SeedStream aug_rng(27);
  const SignalBatch aug = Augment(raw, c.augment, aug_rng);
  const AccupAdapter::Targets targets = a.ComputeTargets(raw, aug);
  ASSERT_NE(a.Objective(raw, aug, targets).item(), 0.0);
  // Conv biases feeding batch-statistics normalization have an exactly zero
  // gradient; the scale floor keeps their rounding noise out of the ratio.
  const auto r = GradCheck(a.trainable(), [&] { return a.Objective(raw, aug, targets); },
                           1e-5, 1e-6, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(AccupAdapterTest, RejectsMismatchedBatches) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 28);
  AccupAdapter a(model, AccupConfig(), 1);
  SeedStream rng(29);
  try {
    a.AdaptBatch(RandomBatch(2, kChannels + 1, kLength, rng));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConformance);
  }
  EXPECT_THROW(a.AdaptBatch(RandomBatch(2, kChannels, kLength + 1, rng)), Error);
  EXPECT_EQ(a.steps(), 0u);
}

TEST(RunStreamTest, EmptyStreamIsContractError) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 30);
  SourceAdapter s(model);
  try {
    RunStream(s, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
}

TEST(RunStreamTest, NumericFailureNamesTheBatch) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 31);
  auto stream = Stream(3, 4, 32);
  stream[2].mutable_values()[5] = std::numeric_limits<double>::quiet_NaN();
  AccupAdapter a(model, AccupConfig(), 1);
  try {
    RunStream(a, stream);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumericDomain);
    EXPECT_NE(std::string(e.what()).find("batch 2 of 3"), std::string::npos) << e.what();
  }
}

TEST(BaselineTest, SourceEqualsBatchedInference) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 33);
  SourceAdapter s(model);
  for (const auto& x : Stream(3, 5, 34)) {
    const BatchResult r = s.AdaptBatch(x);
    const Tensor logits = Infer(model, x).logits;
    EXPECT_EQ(r.p_out, std::vector<double>(logits.values().begin(), logits.values().end()));
    EXPECT_EQ(r.predictions, RowArgmax(logits));
  }
}

TEST(BaselineTest, TentAtZeroLearningRateEqualsBnStats) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 35);
  BnStatsAdapter bn(model);
  NormStepAdapter tent(StrategyKind::kTent, model, BaselineConfig{0.0});
  for (const auto& x : Stream(4, 5, 36)) {
    EXPECT_EQ(tent.AdaptBatch(x).p_out, bn.AdaptBatch(x).p_out);
  }
}

TEST(BaselineTest, TentStepLowersEntropyOnTheSameBatch) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 37);
  const SignalBatch x = Stream(1, 16, 38)[0];
  Model probe = model;
  const double before =
      MeanEntropy(Forward(probe, x, ops::BatchNormMode::kBatchStats).logits).item();
  NormStepAdapter tent(StrategyKind::kTent, model, BaselineConfig{1e-3});
  tent.AdaptBatch(x);
  Model after_model = tent.model();
  const double after =
      MeanEntropy(Forward(after_model, x, ops::BatchNormMode::kBatchStats).logits).item();
  EXPECT_LT(after, before);
}

TEST(BaselineTest, NormStepsTouchOnlyNormAffineParameters) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 39);
  for (auto kind : {StrategyKind::kTent, StrategyKind::kPseudoLabel}) {
    NormStepAdapter a(kind, model, BaselineConfig{1e-2});
    RunStream(a, Stream(2, 6, 40));
    const Model& m = a.model();
    for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
      const auto& before = model.blocks()[i];
      const auto& after = m.blocks()[i];
      EXPECT_EQ(Snapshot({after.conv_weight, after.conv_bias}),
                Snapshot({before.conv_weight, before.conv_bias}));
    }
    EXPECT_EQ(Snapshot(m.ClassifierParameters()), Snapshot(model.ClassifierParameters()));
    EXPECT_NE(Snapshot(m.NormParameters()), Snapshot(model.NormParameters()))
        << StrategyName(kind);
    EXPECT_EQ(a.steps(), 2u);
  }
}

TEST(BaselineTest, FactoryBuildsEveryStrategy) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 41);
  for (auto kind : {StrategyKind::kAccup, StrategyKind::kSource, StrategyKind::kBnStats,
                    StrategyKind::kTent, StrategyKind::kPseudoLabel}) {
    StrategyConfig sc;
    sc.kind = kind;
    auto a = MakeAdapter(model, sc, 1);
    EXPECT_EQ(a->kind(), kind);
    EXPECT_EQ(ParseStrategy(StrategyName(kind)), kind);
    const RunRecord r = RunStream(*a, Stream(2, 3, 42));
    EXPECT_EQ(r.Predictions().size(), 6u);
  }
  EXPECT_EQ(ParseStrategy("bn"), StrategyKind::kBnStats);
  EXPECT_EQ(ParseStrategy("pl"), StrategyKind::kPseudoLabel);
  EXPECT_THROW(ParseStrategy("magic"), Error);
}

TEST(BaselineTest, PrefixCausalForEveryStrategy) {
  const Model model = TinyModel(kChannels, kClasses, kLength, 43);
  const auto stream = Stream(4, 4, 44);
  for (auto kind : {StrategyKind::kSource, StrategyKind::kBnStats, StrategyKind::kTent,
                    StrategyKind::kPseudoLabel}) {
    StrategyConfig sc;
    sc.kind = kind;
    auto full = MakeAdapter(model, sc, 1);
    const RunRecord all = RunStream(*full, stream);
    auto part = MakeAdapter(model, sc, 1);
    const RunRecord prefix =
        RunStream(*part, std::vector<SignalBatch>(stream.begin(), stream.begin() + 2));
    EXPECT_EQ(prefix.batch_predictions[0], all.batch_predictions[0]);
    EXPECT_EQ(prefix.batch_predictions[1], all.batch_predictions[1]);
  }
}

}  // namespace
}  // namespace accup
