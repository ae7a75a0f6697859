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

#include "accup/method.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "accup/error.hpp"
#include "accup/ops.hpp"

namespace accup {
namespace {

void RequireMatrix(const char* what, const Tensor& t) {
  Require(t.rank() == 2, ErrorKind::kConformance,
          std::string(what) + " must be a matrix, got shape " +
              ShapeToString(t.shape()));
}

}  // namespace

double ShannonEntropy(std::span<const double> logits) {
  Require(!logits.empty(), ErrorKind::kContract, "entropy of an empty row");
  CheckFinite("shannon_entropy", logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lse = m + std::log(z);
  double h = 0.0;
  for (double v : logits) {
    const double log_p = v - lse;
    h -= std::exp(log_p) * log_p;
  }
  return std::max(h, 0.0);
}

std::vector<double> RowEntropies(const Tensor& logits) {
  RequireMatrix("entropy input", logits);
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<double> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    out[i] = ShannonEntropy(logits.values().subspan(i * c, c));
  }
  return out;
}

std::int32_t Argmax(std::span<const double> row) {
  return static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) -
                                   row.begin());
}

std::vector<std::int32_t> RowArgmax(const Tensor& logits) {
  RequireMatrix("argmax input", logits);
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<std::int32_t> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    out[i] = Argmax(logits.values().subspan(i * c, c));
  }
  return out;
}

Tensor MeanEntropy(const Tensor& logits) {
  RequireMatrix("entropy input", logits);
  Tensor plogp = ops::Mul(ops::Softmax(logits), ops::LogSoftmax(logits));
  return ops::Scale(ops::SumAll(plogp),
                    -1.0 / static_cast<double>(logits.dim(0)));
}

EnsembleOutput Ensemble(const Tensor& f_raw, const Tensor& p_raw,
                        const Tensor& f_aug, const Tensor& p_aug, double w) {
  Require(w > 0.0 && w < 1.0, ErrorKind::kConfig,
          "ensemble weight must lie in (0, 1), got " + std::to_string(w));
  return {ops::Add(ops::Scale(f_raw, w), ops::Scale(f_aug, 1.0 - w)),
          ops::Add(ops::Scale(p_raw, w), ops::Scale(p_aug, 1.0 - w))};
}

EnsembleOutput Ensemble(const Tensor& f_raw, const Tensor& p_raw,
                        const Tensor& f_aug, const Tensor& p_aug,
                        const Tensor& w) {
  Require(w.numel() == 1, ErrorKind::kConformance,
          "ensemble weight must hold one value");
  Require(w[0] > 0.0 && w[0] < 1.0, ErrorKind::kConfig,
          "ensemble weight must lie in (0, 1)");
  Tensor rest = ops::AddScalar(ops::Scale(w, -1.0), 1.0);
  return {ops::Add(ops::Mul(f_raw, w), ops::Mul(f_aug, rest)),
          ops::Add(ops::Mul(p_raw, w), ops::Mul(p_aug, rest))};
}

SupportSet::SupportSet(std::size_t num_classes, std::size_t feature_dim)
    : feature_dim_(feature_dim), classes_(num_classes) {}

SupportSet SupportSet::FromClassifier(const Tensor& weight) {
  RequireMatrix("classifier weight", weight);
  const std::size_t c = weight.dim(0), f = weight.dim(1);
  SupportSet set(c, f);
  for (std::size_t k = 0; k < c; ++k) {
    SupportEntry e;
    auto row = weight.values().subspan(k * f, f);
    e.feature.assign(row.begin(), row.end());
    e.logits.assign(c, 0.0);
    e.logits[k] = 1.0;
    e.entropy = 0.0;
    e.pseudo_label = static_cast<std::int32_t>(k);
    e.origin = EntryOrigin::kClassifier;
    set.classes_[k].push_back(std::move(e));
  }
  return set;
}

void SupportSet::Append(const Tensor& features, const Tensor& logits,
                        std::span<const double> entropies) {
  RequireMatrix("support features", features);
  RequireMatrix("support logits", logits);
  const std::size_t b = features.dim(0);
  Require(logits.dim(0) == b && entropies.size() == b &&
              features.dim(1) == feature_dim_ &&
              logits.dim(1) == num_classes(),
          ErrorKind::kConformance,
          "support rows do not conform: features " +
              ShapeToString(features.shape()) + ", logits " +
              ShapeToString(logits.shape()));
  const std::size_t c = num_classes();
  for (std::size_t i = 0; i < b; ++i) {
    SupportEntry e;
    auto f = features.values().subspan(i * feature_dim_, feature_dim_);
    auto p = logits.values().subspan(i * c, c);
    e.feature.assign(f.begin(), f.end());
    e.logits.assign(p.begin(), p.end());
    e.entropy = entropies[i];
    e.pseudo_label = Argmax(p);
    e.origin = EntryOrigin::kStream;
    Add(std::move(e));
  }
}

void SupportSet::Add(SupportEntry entry) {
  Require(entry.pseudo_label >= 0 &&
              static_cast<std::size_t>(entry.pseudo_label) < num_classes(),
          ErrorKind::kLabelRange, "support entry label out of range");
  Require(entry.feature.size() == feature_dim_, ErrorKind::kConformance,
          "support entry feature has the wrong length");
  classes_[static_cast<std::size_t>(entry.pseudo_label)].push_back(
      std::move(entry));
}

std::size_t SupportSet::total_size() const {
  std::size_t n = 0;
  for (const auto& c : classes_) n += c.size();
  return n;
}

std::vector<NamedTensor> SupportSet::ToNamedTensors() const {
  std::vector<NamedTensor> out;
  const std::size_t nc = num_classes();
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& entries = classes_[c];
    const std::size_t n = entries.size();
    std::vector<double> f, p, h, o;
    for (const auto& e : entries) {
      f.insert(f.end(), e.feature.begin(), e.feature.end());
      p.insert(p.end(), e.logits.begin(), e.logits.end());
      h.push_back(e.entropy);
      o.push_back(static_cast<double>(e.origin));
    }
    const std::string prefix = "class" + std::to_string(c) + ".";
    out.push_back({prefix + "features", Tensor::FromVector({n, feature_dim_}, f)});
    out.push_back({prefix + "logits", Tensor::FromVector({n, nc}, p)});
    out.push_back({prefix + "entropy", Tensor::FromVector({n}, h)});
    out.push_back({prefix + "origin", Tensor::FromVector({n}, o)});
  }
  return out;
}

PrototypeSet ComputePrototypes(const SupportSet& set, std::size_t k) {
  Require(k >= 1, ErrorKind::kConfig, "prototype filter size K must be >= 1");
  const std::size_t nc = set.num_classes(), fd = set.feature_dim();
  PrototypeSet out;
  std::vector<double> mu(nc * fd, 0.0);
  out.counts.resize(nc, 0);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& entries = set.entries(c);
    Require(!entries.empty(), ErrorKind::kContract,
            "class " + std::to_string(c) + " has no support entries");
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return entries[a].entropy < entries[b].entropy;
    });
    const std::size_t keep = std::min(k, entries.size());
    double* row = mu.data() + c * fd;
    for (std::size_t r = 0; r < keep; ++r) {
      const auto& f = entries[order[r]].feature;
      for (std::size_t j = 0; j < fd; ++j) row[j] += f[j];
    }
    for (std::size_t j = 0; j < fd; ++j) row[j] /= static_cast<double>(keep);
    out.counts[c] = keep;
  }
  out.mu = Tensor::FromVector({nc, fd}, std::move(mu));
  return out;
}

Tensor PrototypeLogits(const Tensor& features, const PrototypeSet& protos,
                       double eta) {
  Require(eta > 0.0 && std::isfinite(eta), ErrorKind::kConfig,
          "prototype scale eta must be positive, got " + std::to_string(eta));
  return ops::Softmax(
      ops::Scale(ops::CosineSimilarity(features, protos.mu), eta));
}

std::vector<std::size_t> LowerEntropyRows(const Tensor& a, const Tensor& b) {
  RequireMatrix("entropy comparison input", a);
  Require(a.shape() == b.shape(), ErrorKind::kConformance,
          "entropy comparison of " + ShapeToString(a.shape()) + " and " +
              ShapeToString(b.shape()));
  const std::vector<double> ha = RowEntropies(a);
  const std::vector<double> hb = RowEntropies(b);
  const std::size_t n = a.dim(0);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = ha[i] < hb[i] ? i : n + i;
  return rows;
}

EntropyComparison EntropyCompare(const Tensor& p_ens, const Tensor& p_proto) {
  RequireMatrix("p_ens", p_ens);
  Require(p_ens.shape() == p_proto.shape(), ErrorKind::kConformance,
          "entropy comparison of " + ShapeToString(p_ens.shape()) + " and " +
              ShapeToString(p_proto.shape()));
  const std::size_t n = p_ens.dim(0), c = p_ens.dim(1);
  EntropyComparison out;
  out.h_ens = RowEntropies(p_ens);
  out.h_proto = RowEntropies(p_proto);
  out.p_out.resize(n * c);
  out.took_proto.resize(n);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool proto = !(out.h_ens[i] < out.h_proto[i]);
    auto src = (proto ? p_proto : p_ens).values().subspan(i * c, c);
    std::copy(src.begin(), src.end(), out.p_out.begin() + i * c);
    out.took_proto[i] = proto;
    out.labels[i] = Argmax(src);
  }
  return out;
}

const char* AnchorScopeName(AnchorScope scope) {
  return scope == AnchorScope::kAll ? "all" : "raw-only";
}

AnchorScope ParseAnchorScope(const std::string& name) {
  if (name == "all") return AnchorScope::kAll;
  if (name == "raw-only") return AnchorScope::kRawOnly;
  Fail(ErrorKind::kConfig, "unknown anchor scope '" + name + "'");
}

Tensor ContrastiveFromCosines(const Tensor& cosines,
                              std::span<const std::int32_t> labels, double tau,
                              AnchorScope scope, std::size_t raw_count) {
  Require(tau > 0.0 && std::isfinite(tau), ErrorKind::kConfig,
          "contrastive temperature tau must be positive, got " +
              std::to_string(tau));
  RequireMatrix("cosine matrix", cosines);
  const std::size_t n = labels.size();
  Require(cosines.dim(0) == n && cosines.dim(1) == n, ErrorKind::kConformance,
          "cosine matrix " + ShapeToString(cosines.shape()) + " does not match " +
              std::to_string(n) + " labels");
  const std::size_t anchors = scope == AnchorScope::kAll ? n : raw_count;
  Require(anchors <= n, ErrorKind::kContract, "more anchors than members");

  Tensor z = ops::Scale(cosines, 1.0 / tau);
  auto zv = z.values();
  std::vector<double> pos_w(n * n, 0.0), neg_m(n * n, 0.0), shift(n * n, 0.0);
  std::vector<double> active(n, 0.0), pad(n, 1.0);
  double shift_total = 0.0;
  for (std::size_t i = 0; i < anchors; ++i) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) continue;
    active[i] = 1.0;
    pad[i] = 0.0;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        pos_w[i * n + j] = 1.0 / static_cast<double>(pos);
      } else {
        neg_m[i * n + j] = 1.0;
        m = std::max(m, zv[i * n + j]);
      }
    }
    // The log-sum-exp over negatives is shifted by its largest term.
    for (std::size_t j = 0; j < n; ++j) shift[i * n + j] = m;
    shift_total += m;
  }

  const Tensor neg_mask = Tensor::FromVector({n, n}, std::move(neg_m));
  Tensor shifted = ops::Mul(
      ops::Sub(z, Tensor::FromVector({n, n}, std::move(shift))), neg_mask);
  Tensor neg_sum = ops::Sum(ops::Mul(ops::Exp(shifted), neg_mask), 1);
  Tensor lse = ops::Log(ops::Add(neg_sum, Tensor::FromVector({n}, std::move(pad))));
  Tensor lse_total =
      ops::SumAll(ops::Mul(lse, Tensor::FromVector({n}, std::move(active))));
  Tensor pos_total =
      ops::SumAll(ops::Mul(z, Tensor::FromVector({n, n}, std::move(pos_w))));
  return ops::AddScalar(ops::Sub(lse_total, pos_total), shift_total);
}

Tensor ContrastiveLoss(const Tensor& view_logits,
                       std::span<const std::int32_t> labels, double tau,
                       AnchorScope scope) {
  RequireMatrix("view logits", view_logits);
  Require(view_logits.dim(0) == labels.size(), ErrorKind::kConformance,
          "view logits " + ShapeToString(view_logits.shape()) +
              " do not match " + std::to_string(labels.size()) + " labels");
  Require(labels.size() % 2 == 0, ErrorKind::kContract,
          "contrastive views come in raw/augmented pairs");
  return ContrastiveFromCosines(ops::CosineSimilarity(view_logits, view_logits),
                                labels, tau, scope, labels.size() / 2);
}

}  // namespace accup
