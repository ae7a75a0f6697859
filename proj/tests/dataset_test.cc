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

#include "accup/dataset.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <unistd.h>
#include <vector>

#include "accup/error.hpp"
#include "gtest/gtest.h"

namespace accup {
namespace {

namespace fs = std::filesystem;

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kContract;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("accup_dataset_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

LabeledSet SmallSet(std::size_t n, std::size_t channels, std::size_t classes,
                    std::size_t length) {
  LabeledSet set;
  set.num_classes = classes;
  set.signals = SignalBatch(n, channels, length);
  for (std::size_t i = 0; i < set.signals.values().size(); ++i) {
    set.signals.mutable_values()[i] = static_cast<float>(0.25 * i - 3.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    set.labels.push_back(static_cast<std::int32_t>(i % classes));
  }
  return set;
}

template <typename T>
void Put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

// Hand-assembled container bytes (little-endian host assumed).
std::vector<std::uint8_t> HandEncode(std::uint32_t cin, std::uint32_t c, std::uint32_t l,
                                     const std::vector<std::int32_t>& labels,
                                     const std::vector<float>& values) {
  std::vector<std::uint8_t> out = {'T', 'T', 'S', 'D'};
  Put<std::uint32_t>(out, 1);
  Put(out, cin);
  Put(out, c);
  Put(out, l);
  Put<std::uint64_t>(out, labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Put(out, labels[i]);
    for (std::size_t k = 0; k < cin * l; ++k) Put(out, values[i * cin * l + k]);
  }
  return out;
}

TEST(ContainerTest, LayoutMatchesHandEncoding) {
  const LabeledSet set = SmallSet(2, 2, 3, 3);
  std::vector<float> values(set.signals.values().begin(), set.signals.values().end());
  EXPECT_EQ(EncodeDataset(set), HandEncode(2, 3, 3, set.labels, values));
}

TEST(ContainerTest, RoundTripIsBitwise) {
  const LabeledSet set = SmallSet(5, 3, 4, 7);
  TempDir dir;
  WriteDataset(dir.file("a.ttsd"), set);
  const LabeledSet back = ReadDataset(dir.file("a.ttsd"));
  EXPECT_EQ(back.signals, set.signals);
  EXPECT_EQ(back.labels, set.labels);
  EXPECT_EQ(back.num_classes, set.num_classes);
}

TEST(ContainerTest, TruncationIsFormatError) {
  const auto bytes = EncodeDataset(SmallSet(3, 2, 2, 5));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
    EXPECT_EQ(KindOf([&] {
                DecodeDataset(std::span<const std::uint8_t>(bytes.data(), cut));
              }),
              ErrorKind::kFormat)
        << cut;
  }
}

TEST(ContainerTest, BadMagicVersionAndTrailingBytesAreFormatErrors) {
  auto bytes = EncodeDataset(SmallSet(2, 1, 2, 4));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(KindOf([&] { DecodeDataset(bad_magic); }), ErrorKind::kFormat);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(KindOf([&] { DecodeDataset(bad_version); }), ErrorKind::kFormat);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(KindOf([&] { DecodeDataset(trailing); }), ErrorKind::kFormat);
}

TEST(ContainerTest, UciharSevenClassLabelIsLabelRangeError) {
  const std::vector<float> values(2 * 9 * 128, 0.5f);
  const auto bytes = HandEncode(9, 6, 128, {0, 6}, values);
  EXPECT_EQ(KindOf([&] { DecodeDataset(bytes); }), ErrorKind::kLabelRange);

  TempDir dir;
  std::ofstream(dir.file("train.ttsd"), std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  WriteDataset(dir.file("test.ttsd"), SmallSet(2, 9, 6, 128));
  EXPECT_EQ(KindOf([&] { LoadDataset(dir.str(), *FindProfile("ucihar")); }),
            ErrorKind::kLabelRange);
}

TEST(ContainerTest, ShapeMismatchAgainstProfileIsDataShapeError) {
  TempDir dir;
  WriteDataset(dir.file("train.ttsd"), SmallSet(2, 8, 6, 128));
  WriteDataset(dir.file("test.ttsd"), SmallSet(2, 8, 6, 128));
  EXPECT_EQ(KindOf([&] { LoadDataset(dir.str(), *FindProfile("ucihar")); }),
            ErrorKind::kDataShape);
}

TEST(ContainerTest, MissingSplitIsIoError) {
  TempDir dir;
  EXPECT_EQ(KindOf([&] { LoadDataset(dir.str(), *FindProfile("mfd")); }), ErrorKind::kIo);
}

TEST(ProfileTest, PaperShapes) {
  EXPECT_EQ(FindProfile("ucihar")->channels, 9u);
  EXPECT_EQ(FindProfile("ucihar")->classes, 6u);
  EXPECT_EQ(FindProfile("ucihar")->length, 128u);
  EXPECT_EQ(FindProfile("mfd")->channels, 1u);
  EXPECT_EQ(FindProfile("mfd")->classes, 3u);
  EXPECT_EQ(FindProfile("mfd")->length, 5120u);
  EXPECT_EQ(FindProfile("ssc")->channels, 1u);
  EXPECT_EQ(FindProfile("ssc")->classes, 5u);
  EXPECT_EQ(FindProfile("ssc")->length, 3000u);
  EXPECT_FALSE(FindProfile("imagenet").has_value());
}

TEST(CsvTest, ImportsRowsAndRejectsBadRows) {
  TempDir dir;
  {
    std::ofstream out(dir.file("ok.csv"));
    out << "# label then values\n1,0.5,1.5,2.5,3.5\n\n0,-1,-2,-3,-4\n";
  }
  const LabeledSet set = ImportCsv(dir.file("ok.csv"), 2, 2, 2);
  EXPECT_EQ(set.labels, (std::vector<std::int32_t>{1, 0}));
  EXPECT_EQ(set.signals.series(0, 1)[1], 3.5);
  EXPECT_EQ(set.signals.series(1, 0)[0], -1.0);
  {
    std::ofstream out(dir.file("short.csv"));
    out << "1,0.5,1.5,2.5\n";
  }
  EXPECT_EQ(KindOf([&] { ImportCsv(dir.file("short.csv"), 2, 2, 2); }),
            ErrorKind::kDataShape);
  {
    std::ofstream out(dir.file("label.csv"));
    out << "5,0.5,1.5,2.5,3.5\n";
  }
  EXPECT_EQ(KindOf([&] { ImportCsv(dir.file("label.csv"), 2, 2, 2); }),
            ErrorKind::kLabelRange);
}

TEST(CsvTest, DirectoryFallsBackToCsv) {
  TempDir dir;
  for (const char* split : {"train.csv", "test.csv"}) {
    std::ofstream out(dir.file(split));
    out << "0,1,2,3\n1,4,5,6\n2,7,8,9\n";
  }
  DatasetMeta meta{"tiny", 1, 3, 3, 3, 3};
  const auto [train, test] = LoadDataset(dir.str(), meta);
  EXPECT_EQ(train.size(), 3u);
  EXPECT_EQ(test.signals.series(2, 0)[2], 9.0);
}

TEST(GeneratorTest, FixedSeedIsBitwiseReproducible) {
  const ShiftSpec s = ShiftSpec::Default(3, 4);
  GeneratorSizes sizes{40, 60, 32};
  const ShiftedPair a = GenerateShiftedPair(s, s.Shifted(3.0, 0.5), sizes, 11);
  const ShiftedPair b = GenerateShiftedPair(s, s.Shifted(3.0, 0.5), sizes, 11);
  EXPECT_EQ(EncodeDataset(a.source), EncodeDataset(b.source));
  EXPECT_EQ(EncodeDataset(a.target), EncodeDataset(b.target));
  const ShiftedPair c = GenerateShiftedPair(s, s.Shifted(3.0, 0.5), sizes, 12);
  EXPECT_NE(EncodeDataset(a.source), EncodeDataset(c.source));
}

TEST(GeneratorTest, BalancedFiniteAndShaped) {
  const ShiftSpec s = ShiftSpec::Default(2, 3);
  const LabeledSet set = GenerateDomain(s, 100, 20, 3);
  EXPECT_EQ(set.signals.batch(), 100u);
  EXPECT_EQ(set.signals.channels(), 2u);
  EXPECT_EQ(set.signals.length(), 20u);
  std::map<std::int32_t, int> counts;
  for (auto y : set.labels) ++counts[y];
  ASSERT_EQ(counts.size(), 3u);
  int lo = 1000, hi = 0;
  for (auto [y, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  EXPECT_LE(hi - lo, 1);
  for (double v : set.signals.values()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(GeneratorTest, ClassProbabilitiesControlImbalance) {
  ShiftSpec s = ShiftSpec::Default(1, 2);
  s.class_probs = {0.8, 0.2};
  const LabeledSet set = GenerateDomain(s, 50, 16, 4);
  int ones = 0;
  for (auto y : set.labels) ones += y;
  EXPECT_EQ(ones, 10);
}

TEST(GeneratorTest, NoiselessSeriesFollowTheFormula) {
  // With zero noise each series is amplitude * sin(...) + offset, so its
  // extremes are bounded by amplitude + offset.
  ShiftSpec s = ShiftSpec::Default(2, 2);
  s.noise_std = 0.0;
  s.offset = 0.5;
  s.amplitude = {2.0, 1.0};
  const LabeledSet set = GenerateDomain(s, 10, 64, 5);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      double lo = 1e9, hi = -1e9;
      for (double v : set.signals.series(i, c)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      EXPECT_LE(hi, s.amplitude[c] + 0.5 + 1e-6);
      EXPECT_GE(lo, -s.amplitude[c] + 0.5 - 1e-6);
      EXPECT_GT(hi - lo, s.amplitude[c]);
    }
  }
}

TEST(GeneratorTest, TargetCarriesTheDeclaredShift) {
  ShiftSpec s = ShiftSpec::Default(1, 2);
  s.noise_std = 0.0;
  const ShiftSpec t = s.Shifted(3.0, 0.0);
  const ShiftedPair p = GenerateShiftedPair(s, t, GeneratorSizes{50, 50, 64}, 6);
  auto rms = [](const LabeledSet& set) {
    double ss = 0.0;
    for (double v : set.signals.values()) ss += v * v;
    return std::sqrt(ss / static_cast<double>(set.signals.values().size()));
  };
  EXPECT_NEAR(rms(p.target) / rms(p.source), 3.0, 0.05);
}

TEST(GeneratorTest, DegenerateSpecsAreConfigErrors) {
  ShiftSpec s = ShiftSpec::Default(2, 3);
  s.frequency = {2.0, 2.0, 2.0};
  EXPECT_EQ(KindOf([&] { s.Validate(); }), ErrorKind::kConfig);
  s = ShiftSpec::Default(2, 3);
  s.class_probs = {0.5, 0.6, 0.1};
  EXPECT_EQ(KindOf([&] { s.Validate(); }), ErrorKind::kConfig);
  s = ShiftSpec::Default(2, 3);
  ShiftSpec other = ShiftSpec::Default(2, 4);
  EXPECT_EQ(KindOf([&] { GenerateShiftedPair(s, other, GeneratorSizes{}, 1); }),
            ErrorKind::kConfig);
}

}  // namespace
}  // namespace accup
