/*
 * Copyright 2026 The hardshap Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hardshap/common.hpp"

namespace hardshap {

using Label = std::uint8_t;
using RowId = std::uint64_t;

// Dense row-major feature matrix with binary labels and stable row ids.
//
// Invariants (checked on construction): n >= 1, d >= 1, every feature is
// finite, labels are 0 or 1, ids are unique, one name per feature.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::size_t dim, std::vector<double> features, std::vector<Label> labels,
          std::vector<RowId> ids, std::vector<std::string> feature_names,
          std::string label_name = "label")
      : dim_(dim),
        features_(std::move(features)),
        labels_(std::move(labels)),
        ids_(std::move(ids)),
        feature_names_(std::move(feature_names)),
        label_name_(std::move(label_name)) {
    validate();
  }

  // Convenience constructor: ids 0..n-1 and names x0..x{d-1}.
  static Dataset from_rows(const std::vector<std::vector<double>>& rows,
                           std::vector<Label> labels) {
    require(!rows.empty(), "dataset must have at least one row");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * d);
    for (const auto& row : rows) {
      require(row.size() == d, "ragged feature rows");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    std::vector<RowId> ids(rows.size());
    std::iota(ids.begin(), ids.end(), RowId{0});
    return Dataset(d, std::move(flat), std::move(labels), std::move(ids), default_names(d));
  }

  static std::vector<std::string> default_names(std::size_t d) {
    std::vector<std::string> names;
    names.reserve(d);
    for (std::size_t f = 0; f < d; ++f) names.push_back("x" + std::to_string(f));
    return names;
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  double at(std::size_t i, std::size_t f) const { return features_[i * dim_ + f]; }
  Label label(std::size_t i) const { return labels_[i]; }
  RowId id(std::size_t i) const { return ids_[i]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<RowId>& ids() const { return ids_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::string& label_name() const { return label_name_; }

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), Label{1}));
  }
  bool has_both_classes() const {
    const auto pos = positives();
    return pos > 0 && pos < size();
  }
  RowId max_id() const { return *std::max_element(ids_.begin(), ids_.end()); }

  // Rows in the given order; ids travel with their rows.
  Dataset select(std::span<const std::size_t> rows) const {
    std::vector<double> feats;
    feats.reserve(rows.size() * dim_);
    std::vector<Label> labels;
    std::vector<RowId> ids;
    labels.reserve(rows.size());
    ids.reserve(rows.size());
    for (auto r : rows) {
      const auto x = row(r);
      feats.insert(feats.end(), x.begin(), x.end());
      labels.push_back(labels_[r]);
      ids.push_back(ids_[r]);
    }
    return Dataset(dim_, std::move(feats), std::move(labels), std::move(ids), feature_names_,
                   label_name_);
  }

  Dataset with_features(std::vector<double> features) const {
    return Dataset(dim_, std::move(features), labels_, ids_, feature_names_, label_name_);
  }
  Dataset with_labels(std::vector<Label> labels) const {
    return Dataset(dim_, features_, std::move(labels), ids_, feature_names_, label_name_);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void validate() const {
    require(dim_ >= 1, "dataset must have at least one feature");
    require(!labels_.empty(), "dataset must have at least one row");
    require(features_.size() == labels_.size() * dim_, "feature matrix shape mismatch");
    require(ids_.size() == labels_.size(), "id count does not match row count");
    require(feature_names_.size() == dim_, "feature name count does not match dimension");
    for (double v : features_) require(std::isfinite(v), "non-finite feature value");
    for (Label y : labels_) require(y <= 1, "invalid label: labels must be 0 or 1");
    std::unordered_set<RowId> seen(ids_.begin(), ids_.end());
    require(seen.size() == ids_.size(), "duplicate row id");
  }

  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<Label> labels_;
  std::vector<RowId> ids_;
  std::vector<std::string> feature_names_;
  std::string label_name_ = "label";
};

// Row union; ids must be disjoint.
inline Dataset concat(const Dataset& a, const Dataset& b) {
  require(a.dim() == b.dim(), "dimension mismatch in concat");
  std::vector<double> feats = a.features();
  feats.insert(feats.end(), b.features().begin(), b.features().end());
  std::vector<Label> labels = a.labels();
  labels.insert(labels.end(), b.labels().begin(), b.labels().end());
  std::vector<RowId> ids = a.ids();
  ids.insert(ids.end(), b.ids().begin(), b.ids().end());
  return Dataset(a.dim(), std::move(feats), std::move(labels), std::move(ids), a.feature_names(),
                 a.label_name());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    const double diff = a[f] - b[f];
    acc += diff * diff;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Stratified splitting.

struct SplitSpec {
  double train_fraction = 0.5;
  double valid_fraction = 0.25;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
};

// Shuffles each class with the seeded generator and deals it to the parts by
// largest-remainder quotas. Parts keep the original row order.
inline std::vector<Dataset> stratified_partition(const Dataset& ds,
                                                 const std::vector<double>& fractions,
                                                 std::uint64_t seed) {
  require(fractions.size() >= 2, "need at least two parts");
  double total = 0.0;
  for (double f : fractions) {
    require(f > 0.0 && f < 1.0, "split fractions must lie in (0,1)");
    total += f;
  }
  require(std::fabs(total - 1.0) <= 1e-9, "split fractions must sum to 1");

  const std::size_t parts = fractions.size();
  std::vector<std::vector<std::size_t>> assigned(parts);
  for (Label cls : {Label{0}, Label{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.label(i) == cls) members.push_back(i);
    require(members.size() >= parts,
            "class " + std::to_string(cls) + " has too few rows to appear in every part");
    Rng rng(derive_seed(seed, cls));
    rng.shuffle(members);

    const auto count = static_cast<double>(members.size());
    std::vector<std::size_t> quota(parts);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t dealt = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      const double exact = count * fractions[p];
      quota[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainders.emplace_back(exact - static_cast<double>(quota[p]), p);
      dealt += quota[p];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; dealt < members.size(); ++r, ++dealt) ++quota[remainders[r].second];

    std::size_t cursor = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      require(quota[p] > 0, "degenerate split: class " + std::to_string(cls) +
                                " would be missing from part " + std::to_string(p));
      for (std::size_t k = 0; k < quota[p]; ++k) assigned[p].push_back(members[cursor++]);
    }
  }

  std::vector<Dataset> out;
  out.reserve(parts);
  for (auto& rows : assigned) {
    std::sort(rows.begin(), rows.end());
    out.push_back(ds.select(rows));
  }
  return out;
}

struct Split {
  Dataset train;
  Dataset valid;
  Dataset test;
};

inline Split stratified_split(const Dataset& ds, const SplitSpec& spec) {
  auto parts = stratified_partition(
      ds, {spec.train_fraction, spec.valid_fraction, spec.test_fraction}, spec.seed);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

// ---------------------------------------------------------------------------
// Standardization: population standard deviation fitted on train only.

struct Standardizer {
  std::vector<double> means;
  std::vector<double> stddevs;
  std::vector<bool> constant;

  static Standardizer fit(const Dataset& train) {
    const std::size_t n = train.size(), d = train.dim();
    Standardizer s;
    s.means.assign(d, 0.0);
    s.stddevs.assign(d, 0.0);
    s.constant.assign(d, false);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < d; ++f) s.means[f] += train.at(i, f);
    for (auto& m : s.means) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < d; ++f) {
        const double diff = train.at(i, f) - s.means[f];
        s.stddevs[f] += diff * diff;
      }
    for (std::size_t f = 0; f < d; ++f) {
      s.stddevs[f] = std::sqrt(s.stddevs[f] / static_cast<double>(n));
      s.constant[f] = s.stddevs[f] <= 1e-12 * std::max(1.0, std::fabs(s.means[f]));
    }
    return s;
  }

  Dataset apply(const Dataset& ds) const {
    require(ds.dim() == means.size(), "dimension mismatch in standardize");
    std::vector<double> feats(ds.features());
    const std::size_t d = ds.dim();
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t f = 0; f < d; ++f) {
        double& v = feats[i * d + f];
        v = constant[f] ? 0.0 : (v - means[f]) / stddevs[f];
      }
    return ds.with_features(std::move(feats));
  }
};

struct Standardized {
  Dataset train;
  std::vector<Dataset> others;
  std::vector<double> means;
  std::vector<double> stddevs;
};

inline Standardized standardize(const Dataset& train, const std::vector<Dataset>& others = {}) {
  const auto scaler = Standardizer::fit(train);
  Standardized out{scaler.apply(train), {}, scaler.means, scaler.stddevs};
  out.others.reserve(others.size());
  for (const auto& ds : others) out.others.push_back(scaler.apply(ds));
  return out;
}

}  // namespace hardshap
