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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "accup/dataset.hpp"
#include "accup/error.hpp"
#include "accup/ops.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace accup {
namespace {

using testing::GradCheck;
using testing::RandomBatch;
using testing::TinyEncoder;
using testing::TinyModel;

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kContract;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() /
          ("accup_backbone_" + std::to_string(::getpid()) + "_" + name))
      .string();
}

TEST(EncoderTest, DefaultConfigEmits128Features) {
  EncoderConfig config;
  config.in_channels = 2;
  SeedStream rng(1);
  for (std::size_t length : {16, 64, 128}) {
    Model model(config, 3, length, rng);
    const SignalBatch x = RandomBatch(2, 2, length, rng);
    const ForwardOutput out = Infer(model, x);
    EXPECT_EQ(out.features.shape(), (Shape{2, 128})) << length;
    EXPECT_EQ(out.logits.shape(), (Shape{2, 3}));
  }
}

TEST(EncoderTest, RejectsSeriesTooShortForThePools) {
  EncoderConfig config;
  EXPECT_EQ(KindOf([&] { config.OutputLength(4); }), ErrorKind::kConformance);
  EXPECT_EQ(config.OutputLength(128), 16u);
}

TEST(EncoderTest, IdenticalSamplesGiveIdenticalFeatures) {
  Model model = TinyModel(3, 4, 32, 2);
  SeedStream rng(3);
  SignalBatch x = RandomBatch(3, 3, 32, rng);
  const auto first = x.sample(0);
  std::copy(first.begin(), first.end(), x.mutable_sample(2).begin());
  const Tensor f = Infer(model, x).features;
  const std::size_t d = f.dim(1);
  for (std::size_t j = 0; j < d; ++j) {
    EXPECT_EQ(f.values()[j], f.values()[2 * d + j]);
  }
}

TEST(EncoderTest, UciharShapedInputAcceptedWrongChannelsRejected) {
  EncoderConfig config;
  config.in_channels = 9;
  SeedStream rng(4);
  Model model(config, 6, 128, rng);
  const ForwardOutput out = Infer(model, RandomBatch(2, 9, 128, rng));
  EXPECT_EQ(out.logits.shape(), (Shape{2, 6}));
  EXPECT_EQ(KindOf([&] { Infer(model, RandomBatch(2, 8, 128, rng)); }),
            ErrorKind::kConformance);
}

TEST(EncoderTest, InferIsDeterministicAndLeavesStatsAlone) {
  Model model = TinyModel(2, 3, 24, 5);
  SeedStream rng(6);
  const SignalBatch x = RandomBatch(4, 2, 24, rng);
  const auto before = model.blocks()[0].bn_stats.running_mean;
  const ForwardOutput a = Infer(model, x);
  const ForwardOutput b = Infer(model, x);
  EXPECT_TRUE(std::equal(a.logits.values().begin(), a.logits.values().end(),
                         b.logits.values().begin()));
  EXPECT_EQ(model.blocks()[0].bn_stats.running_mean, before);
}

TEST(EncoderTest, BatchModeRefreshesRunningStats) {
  Model model = TinyModel(2, 3, 24, 7);
  SeedStream rng(8);
  const auto before = model.blocks()[1].bn_stats.running_var;
  Forward(model, RandomBatch(4, 2, 24, rng), ops::BatchNormMode::kBatchStats);
  EXPECT_NE(model.blocks()[1].bn_stats.running_var, before);
}

TEST(ClassifierTest, ZeroFeaturesGiveBias) {
  Model model = TinyModel(1, 4, 16, 9);
  const Tensor f = Tensor::Zeros({3, model.config().feature_dim()});
  const Tensor logits = Classify(model, f);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(logits.values()[i * 4 + c], model.classifier_bias().values()[c]);
    }
  }
}

TEST(ClassifierTest, IdentityBlockCopiesLeadingFeatures) {
  Model model = TinyModel(1, 3, 16, 10);
  const std::size_t d = model.config().feature_dim();
  Tensor w = model.classifier_weight();
  Tensor b = model.classifier_bias();
  std::fill(w.mutable_values().begin(), w.mutable_values().end(), 0.0);
  std::fill(b.mutable_values().begin(), b.mutable_values().end(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) w.mutable_values()[c * d + c] = 1.0;
  SeedStream rng(11);
  const Tensor f = testing::RandomTensor({2, d}, rng);
  const Tensor logits = Classify(model, f);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(logits.values()[i * 3 + c], f.values()[i * d + c]);
    }
  }
}

TEST(ClassifierTest, HandComputedCase) {
  // W = [[1,2,3],[4,5,6]], b = [0.5,-1], f = [1,0,-1] -> [-1.5, -3].
  EncoderConfig config = TinyEncoder(1);
  config.filters = {2, 2, 3};
  SeedStream rng(12);
  Model model(config, 2, 16, rng);
  Tensor w = model.classifier_weight();
  Tensor b = model.classifier_bias();
  const double wv[] = {1, 2, 3, 4, 5, 6};
  std::copy(std::begin(wv), std::end(wv), w.mutable_values().begin());
  b.mutable_values()[0] = 0.5;
  b.mutable_values()[1] = -1.0;
  const Tensor logits = Classify(model, Tensor::FromVector({1, 3}, {1, 0, -1}));
  EXPECT_EQ(logits.values()[0], -1.5);
  EXPECT_EQ(logits.values()[1], -3.0);
}

TEST(ClassifierTest, SixClassModelEmitsSixLogits) {
  Model model = TinyModel(9, 6, 32, 13);
  SeedStream rng(14);
  EXPECT_EQ(Infer(model, RandomBatch(5, 9, 32, rng)).logits.shape(), (Shape{5, 6}));
}

TEST(CrossEntropyTest, MatchesDirectFormula) {
  const Tensor logits = Tensor::FromVector({2, 3}, {1, 2, 3, 0, 0, 0});
  const std::vector<std::int32_t> labels = {2, 1};
  const double l0 = -(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  const double l1 = std::log(3.0);
  EXPECT_NEAR(CrossEntropy(logits, labels).item(), (l0 + l1) / 2.0, 1e-14);
}

TEST(CrossEntropyTest, LabelOutOfRangeIsRejected) {
  const Tensor logits = Tensor::Zeros({2, 3});
  const std::vector<std::int32_t> labels = {0, 3};
  EXPECT_EQ(KindOf([&] { CrossEntropy(logits, labels); }), ErrorKind::kLabelRange);
}

TEST(CrossEntropyTest, PretrainingLossGradientMatchesFiniteDifferences) {
  Model model = TinyModel(2, 3, 16, 15);
  SeedStream rng(16);
  const SignalBatch x = RandomBatch(2, 2, 16, rng);
  const std::vector<std::int32_t> labels = {0, 2};
  std::vector<Tensor> params = model.AllParameters();
  model.SetTrainable(params);
  // Batch-stats outputs do not depend on the running statistics it updates.
  auto f = [&] {
    return CrossEntropy(
        Forward(model, x, ops::BatchNormMode::kBatchStats).logits, labels);
  };
  const auto r = GradCheck(params, f);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

LabeledSet TwoClassData(std::uint64_t seed) {
  ShiftSpec spec = ShiftSpec::Default(2, 2);
  spec.frequency = {1.0, 4.0};
  spec.noise_std = 0.1;
  return GenerateDomain(spec, 64, 32, seed);
}

TEST(PretrainTest, SeparableTwoClassDataIsLearned) {
  const LabeledSet train = TwoClassData(17);
  PretrainConfig pc;
  pc.batch_size = 16;
  pc.seed = 1;
  const PretrainResult r = PretrainSource(TinyModel(2, 2, 32, 1), train, pc);
  EXPECT_EQ(r.epoch_losses.size(), 40u);
  EXPECT_GT(r.train_accuracy, 0.95);
}

TEST(PretrainTest, LossTrendsDownAcrossSeeds) {
  const LabeledSet train = TwoClassData(18);
  std::vector<double> mean(10, 0.0);
  for (std::uint64_t seed : {0, 1, 2}) {
    PretrainConfig pc;
    pc.epochs = 10;
    pc.batch_size = 16;
    pc.seed = seed;
    const PretrainResult r = PretrainSource(TinyModel(2, 2, 32, seed), train, pc);
    for (std::size_t e = 0; e < 10; ++e) mean[e] += r.epoch_losses[e] / 3.0;
  }
  for (std::size_t e = 1; e < 10; ++e) EXPECT_LE(mean[e], mean[0]) << "epoch " << e;
}

TEST(PretrainTest, SameSeedIsBitwiseReproducible) {
  const LabeledSet train = TwoClassData(19);
  PretrainConfig pc;
  pc.epochs = 2;
  pc.batch_size = 16;
  pc.seed = 4;
  const auto a = PretrainSource(TinyModel(2, 2, 32, 4), train, pc);
  const auto b = PretrainSource(TinyModel(2, 2, 32, 4), train, pc);
  EXPECT_EQ(ModelHash(a.model), ModelHash(b.model));
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
}

TEST(ModelFileTest, SaveLoadReproducesLogitsBitwise) {
  Model model = TinyModel(3, 4, 32, 20);
  SeedStream rng(21);
  // Move the running statistics away from their initial values first.
  Forward(model, RandomBatch(8, 3, 32, rng), ops::BatchNormMode::kBatchStats);
  const std::string path = TempPath("model.ttaw");
  SaveModel(model, path);
  const Model loaded = LoadModel(path);
  for (std::size_t i = 0; i < kEncoderBlocks; ++i) {
    EXPECT_EQ(loaded.blocks()[i].bn_stats.running_mean,
              model.blocks()[i].bn_stats.running_mean);
    EXPECT_EQ(loaded.blocks()[i].bn_stats.running_var,
              model.blocks()[i].bn_stats.running_var);
  }
  const SignalBatch x = RandomBatch(5, 3, 32, rng);
  const Tensor a = Infer(model, x).logits;
  const Tensor b = Infer(loaded, x).logits;
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_EQ(ModelHash(model), ModelHash(loaded));
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST(ModelFileTest, CorruptFilesAreFormatErrors) {
  Model model = TinyModel(1, 2, 16, 22);
  const std::string path = TempPath("corrupt.ttaw");
  SaveModel(model, path);
  {
    std::ofstream(path + ".json") << "{\"format\": \"something-else\"";
  }
  EXPECT_EQ(KindOf([&] { LoadModel(path); }), ErrorKind::kFormat);
  SaveModel(model, path);
  std::filesystem::resize_file(path, 40);
  EXPECT_EQ(KindOf([&] { LoadModel(path); }), ErrorKind::kFormat);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
  EXPECT_EQ(KindOf([&] { LoadModel(path); }), ErrorKind::kIo);
}

TEST(ModelTest, CopiesAreDeep) {
  Model a = TinyModel(1, 2, 16, 23);
  Model b = a;
  Tensor w = b.classifier_weight();
  w.mutable_values()[0] += 1.0;
  EXPECT_NE(a.classifier_weight().values()[0], b.classifier_weight().values()[0]);
}

TEST(ModelTest, LayerMaskSelectsBlocks) {
  Model model = TinyModel(1, 2, 16, 24);
  LayerMask all;
  EXPECT_EQ(model.EncoderParameters(all).size(), 12u);
  LayerMask first;
  first.blocks = {true, false, false};
  EXPECT_EQ(model.EncoderParameters(first).size(), 4u);
  EXPECT_EQ(model.NormParameters().size(), 6u);
  EXPECT_EQ(model.AllParameters().size(), 14u);
}

}  // namespace
}  // namespace accup
