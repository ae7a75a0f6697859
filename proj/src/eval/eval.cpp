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

#include "accup/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "accup/binary_io.hpp"
#include "accup/error.hpp"

namespace accup {
namespace {

using nlohmann::json;

// Reads an object key by key and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    Require(j_.is_object(), ErrorKind::kConfig, path_ + " must be a JSON object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  bool Get(const std::string& key, T& out) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      Fail(ErrorKind::kConfig, Path(key) + ": " + e.what());
    }
    return true;
  }

  // Non-negative integer.
  bool GetCount(const std::string& key, std::size_t& out) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    const json& v = j_.at(key);
    Require(v.is_number_unsigned() ||
                (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            ErrorKind::kConfig, Path(key) + " must be a non-negative integer");
    out = v.get<std::size_t>();
    return true;
  }

  const json* Sub(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string Path(const std::string& key) const { return path_ + "." + key; }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        Fail(ErrorKind::kConfig, "unknown key " + Path(it.key()));
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

const char* InterpolationName(WarpInterpolation i) {
  return i == WarpInterpolation::kNaturalCubic ? "natural-cubic" : "linear";
}

WarpInterpolation ParseInterpolation(const std::string& name) {
  if (name == "natural-cubic") return WarpInterpolation::kNaturalCubic;
  if (name == "linear") return WarpInterpolation::kLinear;
  Fail(ErrorKind::kConfig, "unknown warp interpolation '" + name + "'");
}

AugmentSpec AugmentFromJsonAt(const json& j, const std::string& path) {
  if (j.is_string()) {
    AugmentSpec spec;
    spec.kind = ParseAugmentKind(j.get<std::string>());
    AugmentSpec defaults;
    switch (spec.kind) {
      case AugmentKind::kJitter:
        return AugmentSpec::Jitter();
      case AugmentKind::kScale:
        return AugmentSpec::Scale();
      case AugmentKind::kPermutation:
        return AugmentSpec::Permutation();
      case AugmentKind::kNone:
        return AugmentSpec::None();
      case AugmentKind::kMagnitudeWarp:
        return AugmentSpec::MagnitudeWarp();
      case AugmentKind::kCompose:
        Fail(ErrorKind::kConfig, path + ": compose needs a 'steps' list");
    }
    return defaults;
  }
  ObjectReader r(j, path);
  std::string kind = "magnitude-warp";
  r.Get("kind", kind);
  AugmentSpec spec;
  switch (ParseAugmentKind(kind)) {
    case AugmentKind::kJitter:
      spec = AugmentSpec::Jitter();
      break;
    case AugmentKind::kScale:
      spec = AugmentSpec::Scale();
      break;
    case AugmentKind::kPermutation:
      spec = AugmentSpec::Permutation();
      break;
    case AugmentKind::kNone:
      spec = AugmentSpec::None();
      break;
    case AugmentKind::kMagnitudeWarp:
      spec = AugmentSpec::MagnitudeWarp();
      break;
    case AugmentKind::kCompose:
      spec.kind = AugmentKind::kCompose;
      break;
  }
  r.Get("sigma", spec.sigma);
  r.GetCount("knots", spec.knots);
  r.GetCount("segments", spec.segments);
  std::string interp;
  if (r.Get("interpolation", interp)) spec.interpolation = ParseInterpolation(interp);
  if (const json* steps = r.Sub("steps")) {
    Require(steps->is_array(), ErrorKind::kConfig, r.Path("steps") + " must be a list");
    for (std::size_t i = 0; i < steps->size(); ++i) {
      spec.steps.push_back(AugmentFromJsonAt(
          (*steps)[i], r.Path("steps") + "[" + std::to_string(i) + "]"));
    }
  }
  r.Finish();
  spec.Validate();
  return spec;
}

AccupConfig AccupFromJsonAt(const json& j, AccupConfig c, const std::string& path) {
  ObjectReader r(j, path);
  std::string preset;
  if (r.Get("preset", preset)) ApplyPreset(preset, c);
  if (const json* presets = r.Sub("presets")) {
    Require(presets->is_array(), ErrorKind::kConfig,
            r.Path("presets") + " must be a list");
    for (const auto& p : *presets) {
      Require(p.is_string(), ErrorKind::kConfig,
              r.Path("presets") + " entries must be strings");
      ApplyPreset(p.get<std::string>(), c);
    }
  }
  r.GetCount("k", c.k);
  r.Get("eta", c.eta);
  r.Get("tau", c.tau);
  r.Get("w", c.w);
  r.Get("lr", c.lr);
  std::string s;
  if (r.Get("weight_mode", s)) c.weight_mode = ParseWeightMode(s);
  if (r.Get("anchors", s)) c.anchors = ParseAnchorScope(s);
  if (r.Get("fallback_logits", s)) c.fallback = ParseFallbackLogits(s);
  if (const json* a = r.Sub("augment")) c.augment = AugmentFromJsonAt(*a, r.Path("augment"));
  r.Get("layers", c.layers.blocks);
  r.Get("use_prototypes", c.use_prototypes);
  r.Get("use_entropy_comparison", c.use_entropy_comparison);
  r.Get("use_augmentation", c.use_augmentation);
  r.Get("use_contrast", c.use_contrast);
  r.Get("use_batch_stats", c.use_batch_stats);
  r.Finish();
  c.Validate();
  return c;
}

ShiftSpec ShiftFromJsonAt(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  std::size_t channels = 3, classes = 4;
  r.GetCount("channels", channels);
  r.GetCount("classes", classes);
  Require(channels >= 1 && classes >= 2, ErrorKind::kConfig,
          path + ": need channels >= 1 and classes >= 2");
  ShiftSpec spec = ShiftSpec::Default(channels, classes);
  double base = spec.frequency[0];
  double step = spec.frequency[1] - spec.frequency[0];
  const bool has_base = r.Get("base_frequency", base);
  const bool has_step = r.Get("frequency_step", step);
  if (has_base || has_step) {
    for (std::size_t c = 0; c < classes; ++c) {
      spec.frequency[c] = base + step * static_cast<double>(c);
    }
  }
  r.Get("amplitude", spec.amplitude);
  r.Get("frequency", spec.frequency);
  r.Get("noise_std", spec.noise_std);
  r.Get("offset", spec.offset);
  r.Get("channel_lag", spec.channel_lag);
  r.Get("class_probs", spec.class_probs);
  r.Finish();
  spec.Validate();
  return spec;
}

json EncoderJson(const EncoderConfig& e) {
  return {{"in_channels", e.in_channels},
          {"filters", e.filters},
          {"kernel_sizes", e.kernel_sizes},
          {"strides", e.strides},
          {"pool_widths", e.pool_widths}};
}

}  // namespace

MacroF1Report MacroF1(std::span<const std::int32_t> predictions,
                      std::span<const std::int32_t> truth,
                      std::size_t num_classes) {
  Require(predictions.size() == truth.size(), ErrorKind::kConformance,
          "macro-F1 needs equal lengths, got " +
              std::to_string(predictions.size()) + " predictions and " +
              std::to_string(truth.size()) + " labels");
  Require(num_classes >= 1, ErrorKind::kConfig, "macro-F1 needs C >= 1");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0),
      fn(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::int32_t v : {predictions[i], truth[i]}) {
      Require(v >= 0 && static_cast<std::size_t>(v) < num_classes,
              ErrorKind::kLabelRange,
              "label " + std::to_string(v) + " outside 0.." +
                  std::to_string(num_classes - 1));
    }
    const auto p = static_cast<std::size_t>(predictions[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    if (p == t) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  MacroF1Report report;
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double t = static_cast<double>(tp[c]);
    const double pd = static_cast<double>(tp[c] + fp[c]);
    const double ad = static_cast<double>(tp[c] + fn[c]);
    const double precision = pd > 0 ? t / pd : 0.0;
    const double recall = ad > 0 ? t / ad : 0.0;
    const double f1 = precision + recall > 0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    report.precision.push_back(precision);
    report.recall.push_back(recall);
    report.f1.push_back(f1);
    sum += f1;
  }
  report.macro_f1 = sum / static_cast<double>(num_classes);
  return report;
}

MeanStd Aggregate(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

void ApplyPreset(const std::string& name, AccupConfig& c) {
  if (name == "ucihar") {
    c.k = 10, c.eta = 20.0, c.tau = 0.7, c.lr = 3e-4;
  } else if (name == "mfd") {
    c.k = 100, c.eta = 1.0, c.tau = 0.6, c.lr = 3e-4;
  } else if (name == "ssc") {
    c.k = 50, c.eta = 50.0, c.tau = 0.3, c.lr = 1e-5;
  } else if (name == "no-contrast") {
    c.use_contrast = false;
  } else if (name == "no-entcomp") {
    c.use_entropy_comparison = false;
  } else if (name == "no-augmentation") {
    c.use_augmentation = false;
  } else if (name == "no-prototypes") {
    c.use_prototypes = false;
  } else {
    Fail(ErrorKind::kConfig, "unknown preset '" + name + "'");
  }
}

std::vector<std::string> PresetNames() {
  return {"ucihar",     "mfd",        "ssc",
          "no-contrast", "no-entcomp", "no-augmentation",
          "no-prototypes"};
}

json ToJson(const AugmentSpec& s) {
  json j = {{"kind", AugmentKindName(s.kind)}};
  switch (s.kind) {
    case AugmentKind::kMagnitudeWarp:
      j["sigma"] = s.sigma;
      j["knots"] = s.knots;
      j["interpolation"] = InterpolationName(s.interpolation);
      break;
    case AugmentKind::kJitter:
    case AugmentKind::kScale:
      j["sigma"] = s.sigma;
      break;
    case AugmentKind::kPermutation:
      j["segments"] = s.segments;
      break;
    case AugmentKind::kCompose:
      j["steps"] = json::array();
      for (const auto& step : s.steps) j["steps"].push_back(ToJson(step));
      break;
    case AugmentKind::kNone:
      break;
  }
  return j;
}

json ToJson(const AccupConfig& c) {
  return {{"k", c.k},
          {"eta", c.eta},
          {"tau", c.tau},
          {"w", c.w},
          {"weight_mode", WeightModeName(c.weight_mode)},
          {"augment", ToJson(c.augment)},
          {"lr", c.lr},
          {"layers", c.layers.blocks},
          {"anchors", AnchorScopeName(c.anchors)},
          {"fallback_logits", FallbackLogitsName(c.fallback)},
          {"use_prototypes", c.use_prototypes},
          {"use_entropy_comparison", c.use_entropy_comparison},
          {"use_augmentation", c.use_augmentation},
          {"use_contrast", c.use_contrast},
          {"use_batch_stats", c.use_batch_stats}};
}

json ToJson(const ShiftSpec& s) {
  return {{"amplitude", s.amplitude},     {"noise_std", s.noise_std},
          {"offset", s.offset},           {"frequency", s.frequency},
          {"channel_lag", s.channel_lag}, {"class_probs", s.class_probs}};
}

json ToJson(const ExperimentConfig& c) {
  json data;
  if (!c.data.dir.empty()) {
    data = {{"dir", c.data.dir},
            {"name", c.data.meta.name},
            {"channels", c.data.meta.channels},
            {"classes", c.data.meta.classes},
            {"length", c.data.meta.length},
            {"n_train", c.data.meta.n_train},
            {"n_test", c.data.meta.n_test}};
  } else {
    data = {{"source", ToJson(c.data.source_spec)},
            {"target", ToJson(c.data.target_spec)},
            {"n_source", c.data.sizes.n_source},
            {"n_target", c.data.sizes.n_target},
            {"length", c.data.sizes.length},
            {"seed", c.data.data_seed}};
  }
  json strategies = json::array();
  for (StrategyKind k : c.strategies) strategies.push_back(StrategyName(k));
  return {{"scenario", c.scenario},
          {"data", data},
          {"encoder", EncoderJson(c.encoder)},
          {"pretrain",
           {{"epochs", c.pretrain.epochs},
            {"batch_size", c.pretrain.batch_size},
            {"lr", c.pretrain.lr}}},
          {"model", c.model_path},
          {"strategies", strategies},
          {"accup", ToJson(c.accup)},
          {"baseline", {{"lr", c.baseline.lr}}},
          {"batch_size", c.batch_size},
          {"seeds", c.seeds},
          {"output", c.output}};
}

json ToJson(const RunRecord& r) {
  return {{"strategy", r.strategy},          {"seed", r.seed},
          {"config_hash", r.config_hash},    {"batch_losses", r.batch_losses},
          {"batch_predictions", r.batch_predictions},
          {"macro_f1", r.macro_f1},          {"wall_ms", r.wall_ms}};
}

AugmentSpec AugmentSpecFromJson(const json& j) {
  return AugmentFromJsonAt(j, "augment");
}

AccupConfig AccupConfigFromJson(const json& j, AccupConfig base) {
  return AccupFromJsonAt(j, std::move(base), "accup");
}

ShiftSpec ShiftSpecFromJson(const json& j) { return ShiftFromJsonAt(j, "spec"); }

ExperimentConfig ExperimentConfigFromJson(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.Get("scenario", c.scenario);

  if (const json* d = r.Sub("data")) {
    ObjectReader dr(*d, "config.data");
    if (dr.Get("dir", c.data.dir)) {
      std::string profile;
      if (dr.Get("profile", profile)) {
        auto meta = FindProfile(profile);
        Require(meta.has_value(), ErrorKind::kConfig,
                "unknown dataset profile '" + profile + "'");
        c.data.meta = *meta;
      }
      dr.Get("name", c.data.meta.name);
      dr.GetCount("channels", c.data.meta.channels);
      dr.GetCount("classes", c.data.meta.classes);
      dr.GetCount("length", c.data.meta.length);
      dr.GetCount("n_train", c.data.meta.n_train);
      dr.GetCount("n_test", c.data.meta.n_test);
    } else {
      if (const json* s = dr.Sub("source")) {
        c.data.source_spec = ShiftFromJsonAt(*s, "config.data.source");
      }
      c.data.target_spec = c.data.source_spec.Shifted(3.0, 0.5);
      if (const json* t = dr.Sub("target")) {
        c.data.target_spec = ShiftFromJsonAt(*t, "config.data.target");
      }
      if (const json* sh = dr.Sub("shift")) {
        ObjectReader sr(*sh, "config.data.shift");
        double factor = 3.0, noise = 0.5;
        sr.Get("amplitude_factor", factor);
        sr.Get("noise_std", noise);
        sr.Finish();
        c.data.target_spec = c.data.source_spec.Shifted(factor, noise);
      }
      dr.GetCount("n_source", c.data.sizes.n_source);
      dr.GetCount("n_target", c.data.sizes.n_target);
      dr.GetCount("length", c.data.sizes.length);
      dr.Get("seed", c.data.data_seed);
    }
    dr.Finish();
  }
  if (const json* e = r.Sub("encoder")) {
    ObjectReader er(*e, "config.encoder");
    er.GetCount("in_channels", c.encoder.in_channels);
    er.Get("filters", c.encoder.filters);
    er.Get("kernel_sizes", c.encoder.kernel_sizes);
    er.Get("strides", c.encoder.strides);
    er.Get("pool_widths", c.encoder.pool_widths);
    er.Finish();
  }
  if (const json* p = r.Sub("pretrain")) {
    ObjectReader pr(*p, "config.pretrain");
    pr.GetCount("epochs", c.pretrain.epochs);
    pr.GetCount("batch_size", c.pretrain.batch_size);
    pr.Get("lr", c.pretrain.lr);
    pr.Finish();
  }
  r.Get("model", c.model_path);
  std::string single;
  if (r.Get("strategy", single)) c.strategies = {ParseStrategy(single)};
  if (const json* s = r.Sub("strategies")) {
    Require(s->is_array() && !s->empty(), ErrorKind::kConfig,
            "config.strategies must be a non-empty list");
    c.strategies.clear();
    for (const auto& name : *s) {
      Require(name.is_string(), ErrorKind::kConfig,
              "config.strategies entries must be strings");
      c.strategies.push_back(ParseStrategy(name.get<std::string>()));
    }
  }
  if (const json* a = r.Sub("accup")) {
    c.accup = AccupFromJsonAt(*a, c.accup, "config.accup");
  }
  if (const json* b = r.Sub("baseline")) {
    ObjectReader br(*b, "config.baseline");
    br.Get("lr", c.baseline.lr);
    br.Finish();
  }
  r.GetCount("batch_size", c.batch_size);
  r.Get("seeds", c.seeds);
  r.Get("output", c.output);
  r.Finish();
  // The encoder follows the data's channel count.
  if (!c.data.dir.empty()) {
    c.encoder.in_channels = c.data.meta.channels;
  } else {
    c.encoder.in_channels = c.data.source_spec.amplitude.size();
  }
  c.Validate();
  return c;
}

StrategyConfig StrategyConfigFromJson(const json& j) {
  StrategyConfig c;
  ObjectReader r(j, "session");
  std::string name;
  if (r.Get("strategy", name)) c.kind = ParseStrategy(name);
  if (const json* a = r.Sub("accup")) c.accup = AccupFromJsonAt(*a, c.accup, "session.accup");
  if (const json* b = r.Sub("baseline")) {
    ObjectReader br(*b, "session.baseline");
    br.Get("lr", c.baseline.lr);
    br.Finish();
  }
  r.Finish();
  Require(c.baseline.lr >= 0.0 && std::isfinite(c.baseline.lr), ErrorKind::kConfig,
          "baseline lr must be finite and non-negative");
  return c;
}

ExperimentConfig ParseExperimentConfig(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return ExperimentConfigFromJson(j);
}

void ExperimentConfig::Validate() const {
  Require(!seeds.empty(), ErrorKind::kConfig, "seeds must be non-empty");
  Require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  Require(!strategies.empty(), ErrorKind::kConfig, "no strategies selected");
  Require(baseline.lr >= 0.0 && std::isfinite(baseline.lr), ErrorKind::kConfig,
          "baseline lr must be finite and non-negative");
  accup.Validate();
  encoder.Validate();
  if (!data.dir.empty()) {
    Require(data.meta.channels >= 1 && data.meta.classes >= 2 &&
                data.meta.length >= 1,
            ErrorKind::kConfig,
            "dataset directory needs a profile or channels/classes/length");
    Require(std::filesystem::is_directory(data.dir), ErrorKind::kIo,
            "data directory " + data.dir + " does not exist");
  } else {
    data.source_spec.Validate();
    data.target_spec.Validate();
    Require(data.source_spec.frequency.size() == data.target_spec.frequency.size() &&
                data.source_spec.amplitude.size() ==
                    data.target_spec.amplitude.size(),
            ErrorKind::kConfig,
            "source and target specs disagree on classes or channels");
    Require(data.sizes.n_source >= 1 && data.sizes.n_target >= 1,
            ErrorKind::kConfig, "synthetic splits must be non-empty");
  }
  if (!model_path.empty()) {
    Require(std::filesystem::exists(model_path), ErrorKind::kIo,
            "model file " + model_path + " does not exist");
  } else {
    Require(pretrain.batch_size >= 1, ErrorKind::kConfig,
            "pretrain batch_size must be >= 1");
  }
}

std::string ConfigHash(const ExperimentConfig& config) {
  json j = ToJson(config);
  j.erase("output");
  return Sha256Hex(j.dump());
}

namespace {

struct PreparedData {
  LabeledSet source;
  LabeledSet target;
};

PreparedData PrepareData(const ExperimentConfig& c) {
  if (!c.data.dir.empty()) {
    auto [train, test] = LoadDataset(c.data.dir, c.data.meta);
    return {std::move(train), std::move(test)};
  }
  ShiftedPair pair = GenerateShiftedPair(c.data.source_spec, c.data.target_spec,
                                         c.data.sizes, c.data.data_seed);
  return {std::move(pair.source), std::move(pair.target)};
}

struct PreparedModel {
  Model model;
  std::string hash;
  std::optional<double> train_accuracy;
};

PreparedModel PrepareModel(const ExperimentConfig& c, const PreparedData& data,
                           std::uint64_t seed) {
  PreparedModel out;
  if (!c.model_path.empty()) {
    out.model = LoadModel(c.model_path);
  } else {
    SeedStream init(seed);
    Model fresh(c.encoder, data.source.num_classes, data.source.signals.length(),
                init);
    PretrainConfig pc = c.pretrain;
    pc.seed = seed;
    PretrainResult r = PretrainSource(std::move(fresh), data.source, pc);
    out.model = std::move(r.model);
    out.train_accuracy = r.train_accuracy;
  }
  out.hash = ModelHash(out.model);
  return out;
}

// Runs `jobs` on up to `workers` threads, rethrowing the first failure.
void RunPool(std::size_t jobs, std::size_t workers,
             const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ExperimentResult Evaluate(const ExperimentConfig& c, const PreparedData& data,
                          const std::vector<PreparedModel>& models) {
  ExperimentResult result;
  result.config = c;
  result.config_hash = ConfigHash(c);
  for (const auto& m : models) {
    result.model_hashes.push_back(m.hash);
    if (m.train_accuracy) result.pretrain_accuracy.push_back(*m.train_accuracy);
  }
  const std::vector<SignalBatch> stream =
      SplitIntoBatches(data.target.signals, c.batch_size);
  for (StrategyKind kind : c.strategies) {
    StrategyResult sr;
    sr.strategy = StrategyName(kind);
    StrategyConfig sc{kind, c.accup, c.baseline};
    std::vector<double> scores;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      auto adapter = MakeAdapter(models[s].model, sc, c.seeds[s]);
      RunRecord record;
      try {
        record = RunStream(*adapter, stream);
      } catch (const Error& e) {
        Fail(e.kind(), "scenario '" + c.scenario + "', strategy " + sr.strategy +
                           ", seed " + std::to_string(c.seeds[s]) + ": " +
                           e.what());
      }
      record.seed = c.seeds[s];
      record.config_hash = result.config_hash;
      MacroF1Report rep =
          MacroF1(record.Predictions(), data.target.labels, data.target.num_classes);
      record.macro_f1 = rep.macro_f1;
      scores.push_back(rep.macro_f1);
      sr.reports.push_back(std::move(rep));
      sr.runs.push_back(std::move(record));
    }
    sr.macro_f1 = Aggregate(scores);
    result.strategies.push_back(std::move(sr));
  }
  return result;
}

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()),
                           text.size()));
}

}  // namespace

nlohmann::json ExperimentResult::ToJson() const {
  json strategies_json = json::array();
  for (const auto& s : strategies) {
    json seeds_json = json::array();
    for (std::size_t i = 0; i < s.runs.size(); ++i) {
      seeds_json.push_back({{"seed", s.runs[i].seed},
                            {"macro_f1", s.reports[i].macro_f1},
                            {"precision", s.reports[i].precision},
                            {"recall", s.reports[i].recall},
                            {"f1", s.reports[i].f1},
                            {"wall_ms", s.runs[i].wall_ms}});
    }
    strategies_json.push_back({{"strategy", s.strategy},
                               {"macro_f1_mean", s.macro_f1.mean},
                               {"macro_f1_std", s.macro_f1.std},
                               {"runs", seeds_json}});
  }
  return {{"config", accup::ToJson(config)},
          {"config_hash", config_hash},
          {"model_hashes", model_hashes},
          {"pretrain_accuracy", pretrain_accuracy},
          {"strategies", strategies_json}};
}

std::string ExperimentResult::SummaryCsv() const {
  std::string out;
  for (const auto& s : strategies) {
    for (const auto& r : s.runs) {
      out += config.scenario + "," + s.strategy + "," + std::to_string(r.seed) +
             "," + Format("%.10f", r.macro_f1) + "," + Format("%.3f", r.wall_ms) +
             "\n";
    }
  }
  return out;
}

ExperimentResult RunExperiment(const ExperimentConfig& config) {
  config.Validate();
  const PreparedData data = PrepareData(config);
  std::vector<PreparedModel> models;
  for (std::uint64_t seed : config.seeds) {
    models.push_back(PrepareModel(config, data, seed));
  }
  ExperimentResult result = Evaluate(config, data, models);
  if (!config.output.empty()) WriteExperiment(result, config.output);
  return result;
}

void WriteExperiment(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "runs", ec);
  Require(!ec, ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
  WriteText((fs::path(dir) / "report.json").string(), result.ToJson().dump(2) + "\n");
  WriteText((fs::path(dir) / "summary.csv").string(),
            "scenario,strategy,seed,macro_f1,wall_ms\n" + result.SummaryCsv());
  for (const auto& s : result.strategies) {
    for (const auto& r : s.runs) {
      json j = ToJson(r);
      j["scenario"] = result.config.scenario;
      const std::size_t idx = static_cast<std::size_t>(&r - s.runs.data());
      j["model_hash"] = result.model_hashes[idx];
      WriteText((fs::path(dir) / "runs" /
                 (s.strategy + "_seed" + std::to_string(r.seed) + ".json"))
                    .string(),
                j.dump() + "\n");
    }
  }
}

SweepConfig ParseSweepConfig(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("sweep is not valid JSON: ") + e.what());
  }
  Require(j.is_object(), ErrorKind::kConfig, "sweep must be a JSON object");
  SweepConfig sweep;
  json base = j.contains("base") ? j.at("base") : json::object();
  sweep.base = ExperimentConfigFromJson(base);
  ObjectReader r(j, "sweep");
  r.Sub("base");
  if (const json* g = r.Sub("grid")) {
    Require(g->is_object(), ErrorKind::kConfig, "sweep.grid must be an object");
    for (auto it = g->begin(); it != g->end(); ++it) {
      Require(it.value().is_array() && !it.value().empty(), ErrorKind::kConfig,
              "sweep.grid." + it.key() + " must be a non-empty list");
      sweep.grid[it.key()] = it.value().get<std::vector<json>>();
    }
  }
  r.GetCount("workers", sweep.workers);
  r.Get("output", sweep.output);
  r.Finish();
  // Expanding once validates every grid key and value up front.
  std::size_t total = 1;
  for (const auto& [key, values] : sweep.grid) total *= values.size();
  Require(total <= 100000, ErrorKind::kConfig, "sweep grid is too large");
  for (const auto& [key, values] : sweep.grid) {
    for (const auto& v : values) {
      AccupFromJsonAt(json{{key, v}}, sweep.base.accup, "sweep.grid");
    }
  }
  return sweep;
}

SweepResult RunSweep(const SweepConfig& config) {
  config.base.Validate();
  // Expand the grid.
  std::vector<ExperimentConfig> entries;
  std::vector<std::pair<std::string, std::vector<json>>> axes(config.grid.begin(),
                                                              config.grid.end());
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    ExperimentConfig e = config.base;
    json overrides = json::object();
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const json& v = axes[a].second[idx[a]];
      overrides[axes[a].first] = v;
      if (!label.empty()) label += ";";
      label += axes[a].first + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    e.accup = AccupFromJsonAt(overrides, config.base.accup, "sweep.grid");
    e.scenario = config.base.scenario + (label.empty() ? "" : "[" + label + "]");
    e.output.clear();
    entries.push_back(std::move(e));
    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == axes.size()) break;
  }

  // Data and source models depend only on the base config.
  const PreparedData data = PrepareData(config.base);
  std::vector<PreparedModel> models(config.base.seeds.size());
  RunPool(models.size(), config.workers, [&](std::size_t s) {
    models[s] = PrepareModel(config.base, data, config.base.seeds[s]);
  });

  SweepResult result;
  result.entries.resize(entries.size());
  RunPool(entries.size(), config.workers, [&](std::size_t i) {
    result.entries[i] = Evaluate(entries[i], data, models);
  });
  if (!config.output.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.output, ec);
    Require(!ec, ErrorKind::kIo, "cannot create " + config.output);
    WriteText((fs::path(config.output) / "summary.csv").string(),
              "scenario,strategy,seed,macro_f1,wall_ms\n" + result.SummaryCsv());
    WriteText((fs::path(config.output) / "sweep.json").string(),
              result.ToJson().dump(2) + "\n");
  }
  return result;
}

std::string SweepResult::SummaryCsv() const {
  std::string out;
  for (const auto& e : entries) out += e.SummaryCsv();
  return out;
}

nlohmann::json SweepResult::ToJson() const {
  json j = json::array();
  for (const auto& e : entries) j.push_back(e.ToJson());
  return {{"entries", j}};
}

std::string RenderReport(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kFormat,
          "summary is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Require(line == "scenario,strategy,seed,macro_f1,wall_ms", ErrorKind::kFormat,
          "unexpected summary header '" + line + "'");
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> scores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // The scenario may itself contain commas; the last four fields do not.
    std::vector<std::string> fields;
    std::size_t end = line.size();
    for (int k = 0; k < 3; ++k) {
      const std::size_t comma = line.rfind(',', end - 1);
      Require(comma != std::string::npos && end > 0, ErrorKind::kFormat,
              "summary line " + std::to_string(line_no) + " is malformed");
      fields.insert(fields.begin(), line.substr(comma + 1, end - comma - 1));
      end = comma;
    }
    const std::size_t comma = line.rfind(',', end - 1);
    Require(comma != std::string::npos, ErrorKind::kFormat,
            "summary line " + std::to_string(line_no) + " is malformed");
    const std::string scenario = line.substr(0, comma);
    const std::string strategy = line.substr(comma + 1, end - comma - 1);
    char* stop = nullptr;
    const double f1 = std::strtod(fields[1].c_str(), &stop);
    Require(stop != fields[1].c_str() && std::isfinite(f1), ErrorKind::kFormat,
            "summary line " + std::to_string(line_no) + " has a bad macro_f1");
    const auto key = std::make_pair(scenario, strategy);
    if (!scores.count(key)) order.push_back(key);
    scores[key].push_back(f1);
  }
  std::string out = "scenario\tstrategy\truns\tmacro_f1 (mean +- std, %)\n";
  for (const auto& key : order) {
    const MeanStd ms = Aggregate(scores[key]);
    out += key.first + "\t" + key.second + "\t" +
           std::to_string(scores[key].size()) + "\t" +
           Format("%.2f", 100.0 * ms.mean) + " +- " +
           Format("%.2f", 100.0 * ms.std) + "\n";
  }
  return out;
}

}  // namespace accup
