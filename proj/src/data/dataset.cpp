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

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "accup/binary_io.hpp"
#include "accup/error.hpp"
#include "accup/random.hpp"

namespace accup {
namespace {

void CheckLabel(std::int64_t label, std::size_t classes, const std::string& what,
                std::size_t row) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    Fail(ErrorKind::kLabelRange,
         what + ": row " + std::to_string(row) + " has label " +
             std::to_string(label) + " outside 0.." +
             std::to_string(classes - 1));
  }
}

}  // namespace

std::optional<DatasetMeta> FindProfile(const std::string& name) {
  if (name == "ucihar") return DatasetMeta{"ucihar", 9, 6, 128, 0, 0};
  if (name == "mfd") return DatasetMeta{"mfd", 1, 3, 5120, 0, 0};
  if (name == "ssc") return DatasetMeta{"ssc", 1, 5, 3000, 0, 0};
  return std::nullopt;
}

std::vector<std::uint8_t> EncodeDataset(const LabeledSet& set) {
  const SignalBatch& s = set.signals;
  Require(s.batch() == set.labels.size(), ErrorKind::kConformance,
          "dataset has " + std::to_string(s.batch()) + " series but " +
              std::to_string(set.labels.size()) + " labels");
  ByteWriter w;
  w.PutBytes(std::string_view(kDatasetMagic, 4));
  w.Put<std::uint32_t>(kDatasetVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(s.channels()));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(set.num_classes));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(s.length()));
  w.Put<std::uint64_t>(s.batch());
  for (std::size_t i = 0; i < s.batch(); ++i) {
    w.Put<std::int32_t>(set.labels[i]);
    for (double v : s.sample(i)) w.Put<float>(static_cast<float>(v));
  }
  return w.Take();
}

LabeledSet DecodeDataset(std::span<const std::uint8_t> bytes,
                         const std::string& what) {
  ByteReader r(bytes, what);
  if (r.GetBytes(4) != std::string_view(kDatasetMagic, 4)) {
    Fail(ErrorKind::kFormat, what + ": bad magic, not a TTSD dataset");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kDatasetVersion) {
    Fail(ErrorKind::kFormat,
         what + ": unsupported version " + std::to_string(version));
  }
  const std::size_t cin = r.Get<std::uint32_t>();
  const std::size_t classes = r.Get<std::uint32_t>();
  const std::size_t len = r.Get<std::uint32_t>();
  const std::uint64_t n = r.Get<std::uint64_t>();
  Require(cin >= 1 && classes >= 1 && len >= 1, ErrorKind::kFormat,
          what + ": zero extent in header");
  const std::uint64_t record = 4 + 4 * static_cast<std::uint64_t>(cin) * len;
  if (n > r.remaining() / record) {
    Fail(ErrorKind::kFormat, what + ": truncated, header declares " +
                                 std::to_string(n) + " records");
  }
  LabeledSet set;
  set.num_classes = classes;
  set.signals = SignalBatch(n, cin, len);
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = r.Get<std::int32_t>();
    CheckLabel(label, classes, what, i);
    set.labels[i] = label;
    for (double& v : set.signals.mutable_sample(i)) v = r.Get<float>();
  }
  if (r.remaining() != 0) {
    Fail(ErrorKind::kFormat, what + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes");
  }
  CheckFinite("dataset", set.signals.values());
  return set;
}

void WriteDataset(const std::string& path, const LabeledSet& set) {
  WriteFileBytes(path, EncodeDataset(set));
}

LabeledSet ReadDataset(const std::string& path) {
  return DecodeDataset(ReadFileBytes(path), path);
}

LabeledSet ImportCsv(const std::string& path, std::size_t channels,
                     std::size_t classes, std::size_t length) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  const std::size_t width = channels * length;
  std::vector<double> values;
  LabeledSet set;
  set.num_classes = classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() ||
          std::any_of(static_cast<const char*>(end), cell.c_str() + cell.size(),
                      [](char ch) { return !std::isspace(static_cast<unsigned char>(ch)); })) {
        Fail(ErrorKind::kFormat, path + ":" + std::to_string(line_no) +
                                     ": not a number: '" + cell + "'");
      }
      fields.push_back(v);
    }
    if (fields.size() != width + 1) {
      Fail(ErrorKind::kDataShape,
           path + ":" + std::to_string(line_no) + ": expected " +
               std::to_string(width + 1) + " fields, got " +
               std::to_string(fields.size()));
    }
    const double label = fields[0];
    if (label != std::floor(label)) {
      Fail(ErrorKind::kFormat,
           path + ":" + std::to_string(line_no) + ": non-integer label");
    }
    CheckLabel(static_cast<std::int64_t>(label), classes, path,
               set.labels.size());
    set.labels.push_back(static_cast<std::int32_t>(label));
    values.insert(values.end(), fields.begin() + 1, fields.end());
  }
  CheckFinite("csv dataset", values);
  set.signals = SignalBatch(set.labels.size(), channels, length, std::move(values));
  return set;
}

void CheckAgainstMeta(const LabeledSet& set, const DatasetMeta& meta,
                      std::size_t expected_count, const std::string& split) {
  const std::string what = meta.name + " " + split + " split";
  const SignalBatch& s = set.signals;
  if (s.channels() != meta.channels || s.length() != meta.length) {
    Fail(ErrorKind::kDataShape,
         what + ": series are " + std::to_string(s.channels()) + " x " +
             std::to_string(s.length()) + ", expected " +
             std::to_string(meta.channels) + " x " + std::to_string(meta.length));
  }
  if (set.num_classes != meta.classes) {
    Fail(ErrorKind::kDataShape,
         what + ": file declares " + std::to_string(set.num_classes) +
             " classes, expected " + std::to_string(meta.classes));
  }
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    CheckLabel(set.labels[i], meta.classes, what, i);
  }
  if (expected_count != 0 && set.size() != expected_count) {
    Fail(ErrorKind::kDataShape, what + ": " + std::to_string(set.size()) +
                                    " series, expected " +
                                    std::to_string(expected_count));
  }
}

std::pair<LabeledSet, LabeledSet> LoadDataset(const std::string& dir,
                                              const DatasetMeta& meta) {
  namespace fs = std::filesystem;
  auto load = [&](const std::string& split) {
    const fs::path bin = fs::path(dir) / (split + ".ttsd");
    const fs::path csv = fs::path(dir) / (split + ".csv");
    if (fs::exists(bin)) return ReadDataset(bin.string());
    if (fs::exists(csv)) {
      return ImportCsv(csv.string(), meta.channels, meta.classes, meta.length);
    }
    Fail(ErrorKind::kIo, "no " + split + ".ttsd or " + split + ".csv in " + dir);
  };
  LabeledSet train = load("train");
  CheckAgainstMeta(train, meta, meta.n_train, "train");
  LabeledSet test = load("test");
  CheckAgainstMeta(test, meta, meta.n_test, "test");
  return {std::move(train), std::move(test)};
}

ShiftSpec ShiftSpec::Default(std::size_t channels, std::size_t classes) {
  ShiftSpec spec;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    spec.amplitude.push_back(1.0 - 0.5 * static_cast<double>(ch) /
                                       static_cast<double>(std::max<std::size_t>(channels, 2)));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    spec.frequency.push_back(2.0 + 0.3 * static_cast<double>(c));
  }
  return spec;
}

ShiftSpec ShiftSpec::Shifted(double amplitude_factor, double noise) const {
  ShiftSpec out = *this;
  for (double& a : out.amplitude) a *= amplitude_factor;
  out.noise_std = noise;
  return out;
}

void ShiftSpec::Validate() const {
  Require(!amplitude.empty(), ErrorKind::kConfig, "shift spec has no channels");
  Require(frequency.size() >= 2, ErrorKind::kConfig,
          "shift spec needs at least two class frequencies");
  std::vector<double> sorted = frequency;
  std::sort(sorted.begin(), sorted.end());
  Require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          ErrorKind::kConfig, "class frequencies must be distinct");
  Require(noise_std >= 0.0 && std::isfinite(noise_std), ErrorKind::kConfig,
          "noise std must be finite and non-negative");
  for (double v : amplitude) {
    Require(std::isfinite(v), ErrorKind::kConfig, "amplitude must be finite");
  }
  for (double v : frequency) {
    Require(std::isfinite(v) && v > 0.0, ErrorKind::kConfig,
            "frequencies must be positive");
  }
  if (!class_probs.empty()) {
    Require(class_probs.size() == frequency.size(), ErrorKind::kConfig,
            "class_probs must have one entry per class");
    double sum = 0.0;
    for (double p : class_probs) {
      Require(p >= 0.0, ErrorKind::kConfig, "class_probs must be >= 0");
      sum += p;
    }
    Require(std::abs(sum - 1.0) < 1e-9, ErrorKind::kConfig,
            "class_probs must sum to 1");
  }
}

LabeledSet GenerateDomain(const ShiftSpec& spec, std::size_t count,
                          std::size_t length, std::uint64_t seed) {
  spec.Validate();
  Require(length >= 1, ErrorKind::kConfig, "series length must be >= 1");
  const std::size_t classes = spec.frequency.size();
  const std::size_t channels = spec.amplitude.size();
  std::vector<double> probs = spec.class_probs;
  if (probs.empty()) probs.assign(classes, 1.0 / static_cast<double>(classes));

  // Largest-remainder apportionment.
  std::vector<std::size_t> counts(classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double exact = probs[c] * static_cast<double>(count);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.push_back({exact - std::floor(exact), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < count; ++r, ++assigned) {
    ++counts[remainders[r % classes].second];
  }

  SeedStream rng(seed);
  std::vector<std::int32_t> labels;
  for (std::size_t c = 0; c < classes; ++c) {
    labels.insert(labels.end(), counts[c], static_cast<std::int32_t>(c));
  }
  std::shuffle(labels.begin(), labels.end(), rng.engine());

  LabeledSet set;
  set.num_classes = classes;
  set.labels = labels;
  set.signals = SignalBatch(count, channels, length);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < count; ++i) {
    const double freq = spec.frequency[static_cast<std::size_t>(labels[i])];
    const double phase = rng.Uniform(0.0, 1.0);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      auto row = set.signals.mutable_series(i, ch);
      for (std::size_t t = 0; t < length; ++t) {
        const double arg =
            two_pi * (freq * static_cast<double>(t) / static_cast<double>(length) +
                      phase) +
            static_cast<double>(ch) * spec.channel_lag;
        double v = spec.amplitude[ch] * std::sin(arg) + spec.offset;
        if (spec.noise_std > 0.0) v += rng.Normal(0.0, spec.noise_std);
        // Stored at container precision so files round-trip exactly.
        row[t] = static_cast<double>(static_cast<float>(v));
      }
    }
  }
  return set;
}

ShiftedPair GenerateShiftedPair(const ShiftSpec& source, const ShiftSpec& target,
                                const GeneratorSizes& sizes, std::uint64_t seed) {
  source.Validate();
  target.Validate();
  Require(source.frequency.size() == target.frequency.size(), ErrorKind::kConfig,
          "source and target specs must have the same class count");
  Require(source.amplitude.size() == target.amplitude.size(), ErrorKind::kConfig,
          "source and target specs must have the same channel count");
  SeedStream seeds(seed);
  ShiftedPair pair;
  pair.source = GenerateDomain(source, sizes.n_source, sizes.length, seeds.NextWord());
  pair.target = GenerateDomain(target, sizes.n_target, sizes.length, seeds.NextWord());
  return pair;
}

}  // namespace accup
