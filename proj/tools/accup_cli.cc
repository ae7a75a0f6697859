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

// Command-line front end. Talks to the library only through accup.h.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "accup/accup.h"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int ExitCode(accup_status s) {
  switch (s) {
    case ACCUP_OK:
      return kExitOk;
    case ACCUP_ERR_CONFIG:
      return kExitConfig;
    case ACCUP_ERR_DATA:
    case ACCUP_ERR_IO:
      return kExitData;
    case ACCUP_ERR_NUMERIC:
      return kExitNumeric;
    default:
      return kExitOther;
  }
}

struct Failure {
  int code;
  std::string message;
};

void Check(accup_status s) {
  if (s != ACCUP_OK) throw Failure{ExitCode(s), accup_last_error()};
}

// Owns a string returned by the library.
class OwnedString {
 public:
  OwnedString() = default;
  ~OwnedString() { accup_string_free(p_); }
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }

 private:
  char* p_ = nullptr;
};

std::string ReadText(const std::string& path, int code_if_missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{code_if_missing, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ParseJson(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Failure{kExitConfig, what + " is not valid JSON: " + e.what()};
  }
}

// "a.b.c=value": value is parsed as JSON, falling back to a plain string.
void ApplySet(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Failure{kExitConfig, "--set expects key=value, got '" + assignment + "'"};
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// Flags shared by the subcommands that take an experiment configuration.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> scenario, model, data_dir, profile, output;
  std::optional<std::string> anchors, fallback, weight_mode, augment;
  std::vector<std::string> strategies, presets;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> batch_size, k, epochs;
  std::optional<double> eta, tau, w, lr, baseline_lr;
  std::optional<std::uint64_t> data_seed;
  bool no_contrast = false, no_entcomp = false, no_augmentation = false,
       no_prototypes = false, no_batch_stats = false;

  void Register(CLI::App* app, bool with_output) {
    app->add_option("-c,--config", config_path, "experiment configuration (JSON)");
    app->add_option("--set", sets, "override a config key, e.g. accup.k=20");
    app->add_option("--scenario", scenario, "scenario name");
    app->add_option("--model", model, "pretrained model file");
    app->add_option("--data-dir", data_dir, "directory with train/test splits");
    app->add_option("--profile", profile, "dataset profile: ucihar, mfd or ssc");
    app->add_option("--data-seed", data_seed, "synthetic data seed");
    app->add_option("--strategy", strategies,
                    "accup, source, bn-stats, tent or pseudo-label (repeatable)");
    app->add_option("--preset", presets, "hyperparameter or ablation preset");
    app->add_option("--seeds", seeds, "adaptation seeds")->delimiter(',');
    app->add_option("--batch-size", batch_size, "stream batch size");
    app->add_option("--epochs", epochs, "source pretraining epochs");
    app->add_option("-k,--k", k, "prototype support size per class");
    app->add_option("--eta", eta, "prototype logit scale");
    app->add_option("--tau", tau, "contrastive temperature");
    app->add_option("--w", w, "ensemble weight");
    app->add_option("--lr", lr, "accup learning rate");
    app->add_option("--baseline-lr", baseline_lr, "tent / pseudo-label learning rate");
    app->add_option("--anchors", anchors, "contrastive anchors: all or raw-only");
    app->add_option("--fallback", fallback, "logits without entropy comparison");
    app->add_option("--weight-mode", weight_mode, "fixed or learnable");
    app->add_option("--augment", augment, "augmentation kind");
    app->add_flag("--no-contrast", no_contrast);
    app->add_flag("--no-entcomp", no_entcomp);
    app->add_flag("--no-augmentation", no_augmentation);
    app->add_flag("--no-prototypes", no_prototypes);
    app->add_flag("--no-batch-stats", no_batch_stats,
                  "keep running normalization statistics during adaptation");
    if (with_output) app->add_option("-o,--output", output, "output directory");
  }

  json Build() const {
    json j = json::object();
    if (!config_path.empty()) {
      j = ParseJson(ReadText(config_path, kExitConfig), config_path);
      if (!j.is_object()) throw Failure{kExitConfig, config_path + " must hold an object"};
    }
    if (scenario) j["scenario"] = *scenario;
    if (model) j["model"] = *model;
    if (data_dir || profile) {
      json& d = j["data"];
      if (!d.is_object()) d = json::object();
      if (data_dir) d["dir"] = *data_dir;
      if (profile) d["profile"] = *profile;
    }
    if (data_seed) j["data"]["seed"] = *data_seed;
    if (!strategies.empty()) {
      j.erase("strategy");
      j["strategies"] = strategies;
    }
    if (!seeds.empty()) j["seeds"] = seeds;
    if (batch_size) j["batch_size"] = *batch_size;
    if (epochs) j["pretrain"]["epochs"] = *epochs;
    if (output) j["output"] = *output;
    json& a = j["accup"];
    if (!a.is_object()) a = json::object();
    if (!presets.empty()) {
      json list = a.value("presets", json::array());
      for (const auto& p : presets) list.push_back(p);
      a["presets"] = list;
    }
    if (k) a["k"] = *k;
    if (eta) a["eta"] = *eta;
    if (tau) a["tau"] = *tau;
    if (w) a["w"] = *w;
    if (lr) a["lr"] = *lr;
    if (anchors) a["anchors"] = *anchors;
    if (fallback) a["fallback_logits"] = *fallback;
    if (weight_mode) a["weight_mode"] = *weight_mode;
    if (augment) a["augment"] = *augment;
    if (no_contrast) a["use_contrast"] = false;
    if (no_entcomp) a["use_entropy_comparison"] = false;
    if (no_augmentation) a["use_augmentation"] = false;
    if (no_prototypes) a["use_prototypes"] = false;
    if (no_batch_stats) a["use_batch_stats"] = false;
    if (a.empty()) j.erase("accup");
    if (baseline_lr) j["baseline"]["lr"] = *baseline_lr;
    for (const auto& s : sets) ApplySet(j, s);
    return j;
  }
};

std::string Join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void PrintDataset(const char* label, const accup_dataset* ds) {
  std::size_t n = 0, ch = 0, len = 0, classes = 0;
  Check(accup_dataset_info(ds, &n, &ch, &len, &classes));
  std::printf("%s: %zu series, %zu channels, length %zu, %zu classes\n", label, n,
              ch, len, classes);
}

int GenerateData(const ConfigFlags& flags, const std::string& out_dir) {
  const std::string text = flags.Build().dump();
  accup_dataset* source = nullptr;
  accup_dataset* target = nullptr;
  Check(accup_dataset_generate(text.c_str(), &source, &target));
  std::unique_ptr<accup_dataset, void (*)(accup_dataset*)> s(source, accup_dataset_free);
  std::unique_ptr<accup_dataset, void (*)(accup_dataset*)> t(target, accup_dataset_free);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Failure{kExitData, "cannot create " + out_dir + ": " + ec.message()};
  Check(accup_dataset_save(source, Join(out_dir, "train.ttsd").c_str()));
  Check(accup_dataset_save(target, Join(out_dir, "test.ttsd").c_str()));
  PrintDataset("train (source)", source);
  PrintDataset("test (target)", target);
  return kExitOk;
}

int Pretrain(const ConfigFlags& flags, std::uint64_t seed, const std::string& out) {
  const json j = flags.Build();
  const std::string text = j.dump();
  accup_dataset* source = nullptr;
  if (j.contains("data") && j["data"].contains("dir")) {
    Check(accup_dataset_load(
        Join(j["data"]["dir"].get<std::string>(), "train.ttsd").c_str(), &source));
  } else {
    accup_dataset* target = nullptr;
    Check(accup_dataset_generate(text.c_str(), &source, &target));
    accup_dataset_free(target);
  }
  std::unique_ptr<accup_dataset, void (*)(accup_dataset*)> s(source, accup_dataset_free);
  accup_model* model = nullptr;
  double accuracy = 0.0;
  Check(accup_model_pretrain(text.c_str(), source, seed, &model, &accuracy));
  std::unique_ptr<accup_model, void (*)(accup_model*)> m(model, accup_model_free);
  Check(accup_model_save(model, out.c_str()));
  OwnedString hash;
  Check(accup_model_hash(model, hash.out()));
  std::printf("model %s\nsha256 %s\ntrain accuracy %.4f\n", out.c_str(),
              hash.str().c_str(), accuracy);
  return kExitOk;
}

int Adapt(const ConfigFlags& flags, bool dry_run) {
  const std::string text = flags.Build().dump();
  if (dry_run) {
    OwnedString resolved, hash;
    Check(accup_config_resolve(text.c_str(), resolved.out(), hash.out()));
    std::printf("%s\nconfig hash %s\n", resolved.str().c_str(), hash.str().c_str());
    return kExitOk;
  }
  OwnedString report;
  Check(accup_experiment_run(text.c_str(), report.out()));
  const json r = ParseJson(report.str(), "report");
  std::string csv = "scenario,strategy,seed,macro_f1,wall_ms\n";
  const std::string scenario = r["config"]["scenario"].get<std::string>();
  for (const auto& s : r["strategies"]) {
    for (const auto& run : s["runs"]) {
      char line[512];
      std::snprintf(line, sizeof(line), "%s,%s,%llu,%.10f,%.3f\n", scenario.c_str(),
                    s["strategy"].get<std::string>().c_str(),
                    static_cast<unsigned long long>(run["seed"].get<std::uint64_t>()),
                    run["macro_f1"].get<double>(), run["wall_ms"].get<double>());
      csv += line;
    }
  }
  OwnedString table;
  Check(accup_report_render(csv.c_str(), table.out()));
  std::printf("%s", table.str().c_str());
  std::printf("config hash %s\n", r["config_hash"].get<std::string>().c_str());
  if (r["config"].value("output", std::string()) != "") {
    std::printf("wrote %s\n", r["config"]["output"].get<std::string>().c_str());
  }
  return kExitOk;
}

int Sweep(const std::string& path, const std::vector<std::string>& grid,
          const std::vector<std::string>& sets, std::size_t workers,
          const std::optional<std::string>& output) {
  json j = ParseJson(ReadText(path, kExitConfig), path);
  if (!j.is_object()) throw Failure{kExitConfig, path + " must hold an object"};
  for (const auto& g : grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw Failure{kExitConfig, "--grid expects key=v1,v2"};
    json values = json::array();
    std::stringstream ss(g.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        values.push_back(json::parse(item));
      } catch (const json::exception&) {
        values.push_back(item);
      }
    }
    j["grid"][g.substr(0, eq)] = values;
  }
  for (const auto& s : sets) ApplySet(j, s);
  if (output) j["output"] = *output;
  OwnedString csv;
  Check(accup_sweep_run(j.dump().c_str(), workers, csv.out()));
  OwnedString table;
  Check(accup_report_render(csv.str().c_str(), table.out()));
  std::printf("%s", table.str().c_str());
  return kExitOk;
}

int Report(const std::string& path) {
  const std::string text = ReadText(path, kExitData);
  OwnedString table;
  Check(accup_report_render(text.c_str(), table.out()));
  std::printf("%s", table.str().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time adaptation of time-series classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(accup_version()));

  ConfigFlags gen_flags, pre_flags, adapt_flags;
  std::string gen_out, pre_out;
  std::uint64_t pre_seed = 0;
  bool dry_run = false;

  CLI::App* gen = app.add_subcommand("generate-data", "write a synthetic source/target pair");
  gen_flags.Register(gen, false);
  gen->add_option("-o,--output", gen_out, "output directory")->required();

  CLI::App* pre = app.add_subcommand("pretrain", "train a source model");
  pre_flags.Register(pre, false);
  pre->add_option("--seed", pre_seed, "initialization and shuffling seed");
  pre->add_option("-o,--output", pre_out, "model file")->required();

  CLI::App* adapt = app.add_subcommand("adapt", "run strategies over the target stream");
  adapt_flags.Register(adapt, true);
  adapt->add_flag("--dry-run", dry_run, "print the resolved configuration and exit");

  std::string sweep_path;
  std::vector<std::string> sweep_grid, sweep_sets;
  std::size_t sweep_workers = 0;
  std::optional<std::string> sweep_out;
  CLI::App* sweep = app.add_subcommand("sweep", "run a hyperparameter grid");
  sweep->add_option("-c,--config", sweep_path, "sweep configuration (JSON)")->required();
  sweep->add_option("--grid", sweep_grid, "grid axis, e.g. k=1,5,10");
  sweep->add_option("--set", sweep_sets, "override a sweep key, e.g. base.seeds=[0]");
  sweep->add_option("--workers", sweep_workers, "worker threads (0: sweep setting)");
  sweep->add_option("-o,--output", sweep_out, "output directory");

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "summarize a summary.csv");
  report->add_option("summary", report_path, "summary.csv file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return GenerateData(gen_flags, gen_out);
    if (*pre) return Pretrain(pre_flags, pre_seed, pre_out);
    if (*adapt) return Adapt(adapt_flags, dry_run);
    if (*sweep) return Sweep(sweep_path, sweep_grid, sweep_sets, sweep_workers, sweep_out);
    if (*report) return Report(report_path);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
