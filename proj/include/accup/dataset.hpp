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

// Labeled time-series datasets: the "TTSD" container, CSV import, named
// shape profiles and a synthetic class-conditional generator with a
// controllable domain shift.
//
// TTSD layout (little-endian):
//   magic "TTSD", version u32 (= 1), Cin u32, C u32, L u32, N u64,
//   N x { label i32, Cin * L f32 values (channel-major, then time) }

#ifndef ACCUP_DATASET_HPP_
#define ACCUP_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "accup/series.hpp"

namespace accup {

inline constexpr char kDatasetMagic[4] = {'T', 'T', 'S', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetMeta {
  std::string name;
  std::size_t channels = 0;
  std::size_t classes = 0;
  std::size_t length = 0;
  std::size_t n_train = 0;  // 0: not checked
  std::size_t n_test = 0;   // 0: not checked

  bool operator==(const DatasetMeta&) const = default;
};

// "ucihar" (9, 6, 128), "mfd" (1, 3, 5120), "ssc" (1, 5, 3000).
std::optional<DatasetMeta> FindProfile(const std::string& name);

std::vector<std::uint8_t> EncodeDataset(const LabeledSet& set);
// Throws kFormat on bad magic/version, truncation or trailing bytes and
// kLabelRange on a label outside 0..C-1.
LabeledSet DecodeDataset(std::span<const std::uint8_t> bytes,
                         const std::string& what = "dataset");

void WriteDataset(const std::string& path, const LabeledSet& set);
LabeledSet ReadDataset(const std::string& path);

// One row per series: label, then Cin * L values. Blank lines and lines
// starting with '#' are skipped.
LabeledSet ImportCsv(const std::string& path, std::size_t channels,
                     std::size_t classes, std::size_t length);

// Throws kDataShape when `set` disagrees with the declared channels/length/
// classes (and counts, when declared non-zero).
void CheckAgainstMeta(const LabeledSet& set, const DatasetMeta& meta,
                      std::size_t expected_count, const std::string& split);

// Reads <dir>/train.ttsd and <dir>/test.ttsd (or train.csv / test.csv) and
// validates both against `meta`.
std::pair<LabeledSet, LabeledSet> LoadDataset(const std::string& dir,
                                              const DatasetMeta& meta);

// Class-conditional sinusoids: series i of class c, channel ch is
//   amplitude[ch] * sin(2 pi (frequency[c] t / L + phase_i) + ch * channel_lag)
//     + offset + Normal(0, noise_std^2),  t = 0..L-1,
// with phase_i ~ Uniform(0, 1) per series.
struct ShiftSpec {
  std::vector<double> amplitude;   // per channel
  double noise_std = 0.2;
  double offset = 0.0;
  std::vector<double> frequency;   // cycles per series, per class
  double channel_lag = 0.5;        // radians between consecutive channels
  std::vector<double> class_probs; // empty: uniform

  // Source-domain default with `classes` frequencies spread over a band.
  static ShiftSpec Default(std::size_t channels, std::size_t classes);
  // The same spec with amplitudes multiplied by `factor` and the given noise.
  ShiftSpec Shifted(double amplitude_factor, double noise_std) const;

  // Throws kConfig.
  void Validate() const;
};

struct GeneratorSizes {
  std::size_t n_source = 480;
  std::size_t n_target = 1600;
  std::size_t length = 64;
};

struct ShiftedPair {
  LabeledSet source;
  LabeledSet target;
};

// Class counts follow class_probs by largest remainder (uniform: counts
// differ by at most one), then the order is shuffled.
LabeledSet GenerateDomain(const ShiftSpec& spec, std::size_t count,
                          std::size_t length, std::uint64_t seed);
ShiftedPair GenerateShiftedPair(const ShiftSpec& source, const ShiftSpec& target,
                                const GeneratorSizes& sizes, std::uint64_t seed);

}  // namespace accup

#endif  // ACCUP_DATASET_HPP_
