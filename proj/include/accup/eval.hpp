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

// Evaluation harness: macro-F1, experiment configuration (JSON), presets,
// multi-seed runs, parameter sweeps and their on-disk reports.

#ifndef ACCUP_EVAL_HPP_
#define ACCUP_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "accup/adapt.hpp"
#include "accup/backbone.hpp"
#include "accup/dataset.hpp"
#include "json.hpp"

namespace accup {

struct MacroF1Report {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
};

// Per-class F1 with 0/0 := 0; macro-F1 averages over all C classes.
MacroF1Report MacroF1(std::span<const std::int32_t> predictions,
                      std::span<const std::int32_t> truth,
                      std::size_t num_classes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population (ddof 0)
};
MeanStd Aggregate(std::span<const double> values);

// Where the labeled data comes from: a dataset directory validated against
// a shape profile, or the synthetic generator.
struct DataSource {
  // Directory mode.
  std::string dir;
  DatasetMeta meta;
  // Synthetic mode (used when dir is empty).
  ShiftSpec source_spec = ShiftSpec::Default(3, 4);
  ShiftSpec target_spec = ShiftSpec::Default(3, 4).Shifted(3.0, 0.5);
  GeneratorSizes sizes;
  std::uint64_t data_seed = 7;
};

struct ExperimentConfig {
  std::string scenario = "synthetic";
  DataSource data;
  // Encoder layout and pretraining; ignored when model_path is set.
  EncoderConfig encoder;
  PretrainConfig pretrain;
  std::string model_path;
  std::vector<StrategyKind> strategies = {StrategyKind::kAccup};
  AccupConfig accup;
  BaselineConfig baseline;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  // Output directory; empty writes nothing.
  std::string output;

  // Throws kConfig (and kIo for referenced paths that do not exist).
  void Validate() const;
};

// Named hyperparameter presets applied onto an AccupConfig:
//   ucihar / mfd / ssc   (K, eta, tau, lr)
//   no-contrast, no-entcomp, no-augmentation, no-prototypes   switches
void ApplyPreset(const std::string& name, AccupConfig& config);
std::vector<std::string> PresetNames();

nlohmann::json ToJson(const AugmentSpec& spec);
nlohmann::json ToJson(const AccupConfig& config);
nlohmann::json ToJson(const ShiftSpec& spec);
nlohmann::json ToJson(const ExperimentConfig& config);
nlohmann::json ToJson(const RunRecord& record);

// Strict readers: unknown keys and wrong types throw kConfig naming the key.
AugmentSpec AugmentSpecFromJson(const nlohmann::json& j);
// Applies "preset" first (if present), then the remaining keys.
AccupConfig AccupConfigFromJson(const nlohmann::json& j,
                                AccupConfig base = AccupConfig{});
ShiftSpec ShiftSpecFromJson(const nlohmann::json& j);
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);
// Object with optional "strategy", "accup" and "baseline" keys.
StrategyConfig StrategyConfigFromJson(const nlohmann::json& j);

ExperimentConfig ParseExperimentConfig(const std::string& text);

// SHA-256 of the canonical JSON of the resolved config.
std::string ConfigHash(const ExperimentConfig& config);

struct StrategyResult {
  std::string strategy;
  std::vector<RunRecord> runs;  // one per seed
  std::vector<MacroF1Report> reports;
  MeanStd macro_f1;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string config_hash;
  std::vector<std::string> model_hashes;  // per seed
  std::vector<double> pretrain_accuracy;  // per seed, empty when loaded
  std::vector<StrategyResult> strategies;

  nlohmann::json ToJson() const;
  // Rows of scenario,strategy,seed,macro_f1,wall_ms without the header.
  std::string SummaryCsv() const;
};

// Loads or generates the data, pretrains (or loads) one source model per
// seed, streams the target split through every strategy and scores the
// predictions. Writes report.json, summary.csv and runs/*.json when
// config.output is set.
ExperimentResult RunExperiment(const ExperimentConfig& config);
void WriteExperiment(const ExperimentResult& result, const std::string& dir);

// A base experiment plus a grid over AccupConfig keys, e.g.
// {"k": [1, 5, 10]}; entries are the cartesian product in key order.
struct SweepConfig {
  ExperimentConfig base;
  std::map<std::string, std::vector<nlohmann::json>> grid;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::string output;
};

SweepConfig ParseSweepConfig(const std::string& text);

struct SweepResult {
  std::vector<ExperimentResult> entries;
  std::string SummaryCsv() const;
  nlohmann::json ToJson() const;
};

// Runs the entries on a worker pool; each worker owns its adapters.
SweepResult RunSweep(const SweepConfig& config);

// Mean +- std per (scenario, strategy) from a summary.csv.
std::string RenderReport(const std::string& summary_csv_text);

}  // namespace accup

#endif  // ACCUP_EVAL_HPP_
