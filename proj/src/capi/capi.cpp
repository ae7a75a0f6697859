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

#include "accup/accup.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "accup/adapt.hpp"
#include "accup/backbone.hpp"
#include "accup/dataset.hpp"
#include "accup/error.hpp"
#include "accup/eval.hpp"
#include "accup/snapshot.hpp"

struct accup_dataset {
  accup::LabeledSet set;
};

struct accup_model {
  accup::Model model;
};

struct accup_session {
  std::unique_ptr<accup::StreamAdapter> adapter;
};

namespace {

thread_local std::string last_error;

accup_status StatusOf(accup::ErrorKind kind) {
  using accup::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig:
      return ACCUP_ERR_CONFIG;
    case ErrorKind::kNumericDomain:
      return ACCUP_ERR_NUMERIC;
    case ErrorKind::kContract:
      return ACCUP_ERR_CONTRACT;
    case ErrorKind::kIo:
      return ACCUP_ERR_IO;
    case ErrorKind::kConformance:
    case ErrorKind::kFormat:
    case ErrorKind::kDataShape:
    case ErrorKind::kLabelRange:
      return ACCUP_ERR_DATA;
  }
  return ACCUP_ERR_INTERNAL;
}

template <typename F>
accup_status Guard(F&& f) {
  try {
    f();
    last_error.clear();
    return ACCUP_OK;
  } catch (const accup::Error& e) {
    last_error = std::string(accup::ErrorKindName(e.kind())) + ": " + e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return ACCUP_ERR_INTERNAL;
}

void NotNull(const void* p, const char* what) {
  accup::Require(p != nullptr, accup::ErrorKind::kContract,
                 std::string(what) + " must not be NULL");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json ParseJson(const char* text, const char* what) {
  NotNull(text, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    accup::Fail(accup::ErrorKind::kConfig,
                std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

const char* accup_version(void) { return "1.0.0"; }

const char* accup_last_error(void) { return last_error.c_str(); }

const char* accup_status_name(accup_status status) {
  switch (status) {
    case ACCUP_OK:
      return "ok";
    case ACCUP_ERR_INTERNAL:
      return "internal";
    case ACCUP_ERR_CONFIG:
      return "config";
    case ACCUP_ERR_DATA:
      return "data";
    case ACCUP_ERR_NUMERIC:
      return "numeric";
    case ACCUP_ERR_CONTRACT:
      return "contract";
    case ACCUP_ERR_IO:
      return "io";
  }
  return "unknown";
}

void accup_string_free(char* s) { std::free(s); }

accup_status accup_dataset_load(const char* path, accup_dataset** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new accup_dataset{accup::ReadDataset(path)};
  });
}

accup_status accup_dataset_save(const accup_dataset* ds, const char* path) {
  return Guard([&] {
    NotNull(ds, "dataset");
    NotNull(path, "path");
    accup::WriteDataset(path, ds->set);
  });
}

accup_status accup_dataset_info(const accup_dataset* ds, size_t* count,
                                size_t* channels, size_t* length, size_t* classes) {
  return Guard([&] {
    NotNull(ds, "dataset");
    if (count) *count = ds->set.size();
    if (channels) *channels = ds->set.signals.channels();
    if (length) *length = ds->set.signals.length();
    if (classes) *classes = ds->set.num_classes;
  });
}

accup_status accup_dataset_labels(const accup_dataset* ds, int32_t* labels,
                                  size_t count) {
  return Guard([&] {
    NotNull(ds, "dataset");
    NotNull(labels, "labels");
    accup::Require(count == ds->set.size(), accup::ErrorKind::kContract,
                   "label buffer holds " + std::to_string(count) +
                       " entries, dataset has " + std::to_string(ds->set.size()));
    std::copy(ds->set.labels.begin(), ds->set.labels.end(), labels);
  });
}

accup_status accup_dataset_generate(const char* config_json, accup_dataset** source,
                                    accup_dataset** target) {
  return Guard([&] {
    NotNull(source, "source");
    NotNull(target, "target");
    const accup::ExperimentConfig c =
        accup::ExperimentConfigFromJson(ParseJson(config_json, "config"));
    accup::Require(c.data.dir.empty(), accup::ErrorKind::kConfig,
                   "data generation needs a synthetic data section, not a directory");
    accup::ShiftedPair pair = accup::GenerateShiftedPair(
        c.data.source_spec, c.data.target_spec, c.data.sizes, c.data.data_seed);
    auto s = std::make_unique<accup_dataset>(accup_dataset{std::move(pair.source)});
    auto t = std::make_unique<accup_dataset>(accup_dataset{std::move(pair.target)});
    *source = s.release();
    *target = t.release();
  });
}

void accup_dataset_free(accup_dataset* ds) { delete ds; }

accup_status accup_model_pretrain(const char* config_json, const accup_dataset* source,
                                  uint64_t seed, accup_model** out,
                                  double* train_accuracy) {
  return Guard([&] {
    NotNull(source, "source");
    NotNull(out, "out");
    accup::ExperimentConfig c =
        accup::ExperimentConfigFromJson(ParseJson(config_json, "config"));
    accup::EncoderConfig encoder = c.encoder;
    encoder.in_channels = source->set.signals.channels();
    accup::SeedStream init(seed);
    accup::Model fresh(encoder, source->set.num_classes,
                       source->set.signals.length(), init);
    accup::PretrainConfig pc = c.pretrain;
    pc.seed = seed;
    accup::PretrainResult r = accup::PretrainSource(std::move(fresh), source->set, pc);
    if (train_accuracy) *train_accuracy = r.train_accuracy;
    *out = new accup_model{std::move(r.model)};
  });
}

accup_status accup_model_load(const char* path, accup_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new accup_model{accup::LoadModel(path)};
  });
}

accup_status accup_model_save(const accup_model* model, const char* path) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(path, "path");
    accup::SaveModel(model->model, path);
  });
}

accup_status accup_model_hash(const accup_model* model, char** hex) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(hex, "hex");
    *hex = CopyString(accup::ModelHash(model->model));
  });
}

void accup_model_free(accup_model* model) { delete model; }

accup_status accup_session_create(const accup_model* model, const char* strategy_json,
                                  uint64_t seed, accup_session** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    const accup::StrategyConfig sc = accup::StrategyConfigFromJson(
        strategy_json ? ParseJson(strategy_json, "strategy") : nlohmann::json::object());
    *out = new accup_session{accup::MakeAdapter(model->model, sc, seed)};
  });
}

accup_status accup_session_adapt_batch(accup_session* session, const double* values,
                                       size_t batch, size_t channels, size_t length,
                                       int32_t* predictions, double* loss) {
  return Guard([&] {
    NotNull(session, "session");
    NotNull(values, "values");
    NotNull(predictions, "predictions");
    accup::Require(batch >= 1, accup::ErrorKind::kContract, "empty batch");
    std::vector<double> v(values, values + batch * channels * length);
    accup::BatchResult r = session->adapter->AdaptBatch(
        accup::SignalBatch(batch, channels, length, std::move(v)));
    std::copy(r.predictions.begin(), r.predictions.end(), predictions);
    if (loss) *loss = r.loss;
  });
}

accup_status accup_session_export_support(const accup_session* session,
                                          const char* path) {
  return Guard([&] {
    NotNull(session, "session");
    NotNull(path, "path");
    const auto* a = dynamic_cast<const accup::AccupAdapter*>(session->adapter.get());
    accup::Require(a != nullptr, accup::ErrorKind::kContract,
                   "only accup sessions keep a support set");
    accup::WriteSnapshot(path, a->support().ToNamedTensors());
  });
}

void accup_session_free(accup_session* session) { delete session; }

accup_status accup_config_resolve(const char* config_json, char** resolved_json,
                                  char** hash) {
  return Guard([&] {
    const accup::ExperimentConfig c =
        accup::ExperimentConfigFromJson(ParseJson(config_json, "config"));
    std::string text = accup::ToJson(c).dump(2);
    std::string h = accup::ConfigHash(c);
    if (resolved_json) *resolved_json = CopyString(text);
    if (hash) *hash = CopyString(h);
  });
}

accup_status accup_experiment_run(const char* config_json, char** report_json) {
  return Guard([&] {
    const accup::ExperimentConfig c =
        accup::ExperimentConfigFromJson(ParseJson(config_json, "config"));
    const accup::ExperimentResult r = accup::RunExperiment(c);
    if (report_json) *report_json = CopyString(r.ToJson().dump(2));
  });
}

accup_status accup_sweep_run(const char* sweep_json, size_t workers,
                             char** summary_csv) {
  return Guard([&] {
    NotNull(sweep_json, "sweep");
    accup::SweepConfig s = accup::ParseSweepConfig(sweep_json);
    if (workers != 0) s.workers = workers;
    const accup::SweepResult r = accup::RunSweep(s);
    if (summary_csv) {
      *summary_csv =
          CopyString("scenario,strategy,seed,macro_f1,wall_ms\n" + r.SummaryCsv());
    }
  });
}

accup_status accup_report_render(const char* summary_csv, char** table) {
  return Guard([&] {
    NotNull(summary_csv, "summary");
    NotNull(table, "table");
    *table = CopyString(accup::RenderReport(summary_csv));
  });
}

}  // extern "C"
