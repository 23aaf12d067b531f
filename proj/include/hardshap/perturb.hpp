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

// Hardness injectors (mislabeling, out-of-distribution shift, atypical
// rescaling), average precision against the planted flags, and the
// characterizer benchmark built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/dataiq.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/valuation.hpp"

namespace hardshap {

enum class HardnessKind { kMislabeling, kOod, kAtypical };

inline std::string_view to_string(HardnessKind k) {
  switch (k) {
    case HardnessKind::kMislabeling: return "mislabeling";
    case HardnessKind::kOod: return "ood";
    case HardnessKind::kAtypical: return "atypical";
  }
  return "unknown";
}

inline HardnessKind hardness_kind_from_string(std::string_view s) {
  for (auto k : {HardnessKind::kMislabeling, HardnessKind::kOod, HardnessKind::kAtypical})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown hardness kind '" + std::string(s) + "'");
}

struct PerturbationRecord {
  std::vector<bool> flags;
  HardnessKind kind = HardnessKind::kMislabeling;
  double proportion = 0.0;
  std::uint64_t seed = 0;

  std::size_t count() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)); }
};

struct Perturbed {
  Dataset data;
  PerturbationRecord record;
};

namespace detail {

// round(p * n) rows drawn uniformly without replacement, in ascending order.
inline std::vector<std::size_t> choose_rows(std::size_t n, double p, Rng& rng) {
  require(p > 0.0 && p < 1.0, "perturbation proportion must lie in (0,1)");
  const std::size_t count = round_count(p * static_cast<double>(n));
  require(count > 0 && count < n, "perturbation proportion selects no rows or every row");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

inline PerturbationRecord make_record(std::size_t n, const std::vector<std::size_t>& rows,
                                      HardnessKind kind, double p, std::uint64_t seed) {
  PerturbationRecord rec{std::vector<bool>(n, false), kind, p, seed};
  for (auto r : rows) rec.flags[r] = true;
  return rec;
}

}  // namespace detail

inline Perturbed mislabel(const Dataset& ds, double p, std::uint64_t seed) {
  Rng rng(seed);
  const auto rows = detail::choose_rows(ds.size(), p, rng);
  auto labels = ds.labels();
  for (auto r : rows) labels[r] = static_cast<Label>(1 - labels[r]);
  return {ds.with_labels(std::move(labels)),
          detail::make_record(ds.size(), rows, HardnessKind::kMislabeling, p, seed)};
}

// Flips the labels of the flagged rows again.
inline Dataset apply_flips(const Dataset& ds, const PerturbationRecord& rec) {
  require(rec.flags.size() == ds.size(), "record does not match dataset size");
  auto labels = ds.labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (rec.flags[i]) labels[i] = static_cast<Label>(1 - labels[i]);
  return ds.with_labels(std::move(labels));
}

inline std::vector<double> population_stddevs(const Dataset& ds) {
  return Standardizer::fit(ds).stddevs;
}

// x <- x + magnitude * (sigma o u) with u a random unit direction per row.
inline Perturbed ood_shift(const Dataset& ds, double p, double magnitude, std::uint64_t seed) {
  require(magnitude > 0.0, "OOD magnitude must be positive");
  Rng rng(seed);
  const auto rows = detail::choose_rows(ds.size(), p, rng);
  const auto sigma = population_stddevs(ds);
  const std::size_t d = ds.dim();
  auto feats = ds.features();
  std::vector<double> u(d);
  for (auto r : rows) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : u) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (std::size_t f = 0; f < d; ++f) feats[r * d + f] += magnitude * sigma[f] * (u[f] / norm);
  }
  return {ds.with_features(std::move(feats)),
          detail::make_record(ds.size(), rows, HardnessKind::kOod, p, seed)};
}

// Linear-interpolation sample quantile (type 7).
inline double empirical_quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Per-class diagonal-covariance Mahalanobis geometry.
struct ClassGeometry {
  std::vector<double> mean;
  std::vector<double> scale;  // per-feature stddev; 0 marks a constant feature

  double radius(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t f = 0; f < mean.size(); ++f) {
      if (scale[f] == 0.0) continue;
      const double z = (x[f] - mean[f]) / scale[f];
      acc += z * z;
    }
    return std::sqrt(acc);
  }

  static ClassGeometry fit(const Dataset& ds, Label cls) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.label(i) == cls) rows.push_back(i);
    require(rows.size() >= 2, "class " + std::to_string(cls) + " needs at least two members");
    const auto scaler = Standardizer::fit(ds.select(rows));
    ClassGeometry g{scaler.means, scaler.stddevs};
    for (std::size_t f = 0; f < g.scale.size(); ++f)
      if (scaler.constant[f]) g.scale[f] = 0.0;
    return g;
  }
};

// Moves each selected row along the ray from its class mean so that its
// diagonal Mahalanobis radius equals the class's `quantile` radius (taken on
// the clean data). A row sitting exactly on the mean is sent in a random
// direction.
inline Perturbed atypical_scale(const Dataset& ds, double p, double quantile, std::uint64_t seed) {
  require(quantile > 0.0 && quantile < 1.0, "atypical quantile must lie in (0,1)");
  Rng rng(seed);
  const auto rows = detail::choose_rows(ds.size(), p, rng);
  const std::size_t d = ds.dim();

  std::vector<ClassGeometry> geometry;
  std::vector<double> target(2, 0.0);
  for (Label cls : {Label{0}, Label{1}}) {
    geometry.push_back(ClassGeometry::fit(ds, cls));
    std::vector<double> radii;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.label(i) == cls) radii.push_back(geometry[cls].radius(ds.row(i)));
    target[cls] = empirical_quantile(std::move(radii), quantile);
  }

  auto feats = ds.features();
  for (auto r : rows) {
    const auto& g = geometry[ds.label(r)];
    const double goal = target[ds.label(r)];
    const double current = g.radius(ds.row(r));
    if (current == goal) continue;
    if (current > 0.0) {
      const double factor = goal / current;
      for (std::size_t f = 0; f < d; ++f)
        feats[r * d + f] = g.mean[f] + factor * (ds.at(r, f) - g.mean[f]);
    } else {
      std::vector<double> u(d);
      double norm = 0.0;
      for (std::size_t f = 0; f < d; ++f) {
        u[f] = g.scale[f] == 0.0 ? 0.0 : rng.normal();
        norm += u[f] * u[f];
      }
      if (norm == 0.0) continue;
      norm = std::sqrt(norm);
      for (std::size_t f = 0; f < d; ++f)
        feats[r * d + f] = g.mean[f] + goal * g.scale[f] * u[f] / norm;
    }
  }
  return {ds.with_features(std::move(feats)),
          detail::make_record(ds.size(), rows, HardnessKind::kAtypical, p, seed)};
}

// Average precision of the ranking by ascending score (lower = harder)
// against the flags. Tied scores form one threshold step:
//   AP = sum_k (R_k - R_{k-1}) * P_k.
inline double auprc(std::span<const double> scores, const std::vector<bool>& flags) {
  require(scores.size() == flags.size(), "scores and flags differ in length");
  const auto positives = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  require(positives > 0, "auprc needs at least one flagged row");
  require(positives < flags.size(), "auprc needs at least one unflagged row");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t k = 0; k < idx.size();) {
    const double s = scores[idx[k]];
    while (k < idx.size() && scores[idx[k]] == s) {
      tp += flags[idx[k]];
      ++seen;
      ++k;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Benchmark.

enum class Characterizer { kKnnShapley, kDataIq, kRandom };

inline std::string_view to_string(Characterizer c) {
  switch (c) {
    case Characterizer::kKnnShapley: return "knn_shapley";
    case Characterizer::kDataIq: return "dataiq";
    case Characterizer::kRandom: return "random";
  }
  return "unknown";
}

inline Characterizer characterizer_from_string(std::string_view s) {
  for (auto c : {Characterizer::kKnnShapley, Characterizer::kDataIq, Characterizer::kRandom})
    if (to_string(c) == s) return c;
  throw InvalidInput("unknown characterizer '" + std::string(s) + "'");
}

struct BenchmarkConfig {
  std::vector<HardnessKind> kinds{HardnessKind::kMislabeling, HardnessKind::kOod, HardnessKind::kAtypical};
  std::vector<double> proportions{0.05, 0.1, 0.15, 0.2};
  std::vector<Characterizer> characterizers{Characterizer::kKnnShapley, Characterizer::kDataIq,
                                            Characterizer::kRandom};
  std::size_t runs = 3;
  std::uint64_t seed = 0;
  std::size_t K = 5;                  // KNN Shapley neighbors
  double reference_fraction = 0.25;   // clean held-out part used as the valuation test set
  bool standardize = true;
  double ood_magnitude = 5.0;
  double atypical_quantile = 0.99;
  std::size_t dataiq_checkpoints = 10;
  std::size_t dataiq_k = 5;
};

struct BenchmarkRow {
  HardnessKind kind;
  double proportion;
  Characterizer characterizer;
  std::size_t run;
  double auprc;
};

struct BenchmarkSummary {
  HardnessKind kind;
  double proportion;
  Characterizer characterizer;
  double mean_auprc;
  double stddev;     // sample stddev over runs (0 for a single run)
  double std_error;  // stddev / sqrt(runs)
};

inline Perturbed inject(const Dataset& ds, HardnessKind kind, double p, std::uint64_t seed,
                        const BenchmarkConfig& cfg) {
  switch (kind) {
    case HardnessKind::kMislabeling: return mislabel(ds, p, seed);
    case HardnessKind::kOod: return ood_shift(ds, p, cfg.ood_magnitude, seed);
    case HardnessKind::kAtypical: return atypical_scale(ds, p, cfg.atypical_quantile, seed);
  }
  throw InvalidInput("unknown hardness kind");
}

inline std::vector<double> characterize(Characterizer c, const Dataset& train, const Dataset& reference,
                                        const BenchmarkConfig& cfg, std::uint64_t seed) {
  switch (c) {
    case Characterizer::kKnnShapley: return knn_shapley(train, reference, cfg.K).scores;
    case Characterizer::kDataIq:
      return dataiq_scores(train, cfg.dataiq_checkpoints, cfg.dataiq_k, seed).scores;
    case Characterizer::kRandom: {
      Rng rng(seed);
      std::vector<double> s(train.size());
      for (auto& v : s) v = rng.uniform();
      return s;
    }
  }
  throw InvalidInput("unknown characterizer");
}

// Each (kind, proportion, run) cell splits the data into a perturbed part and
// a clean reference part (stratified), perturbs, and scores every
// characterizer against the planted flags. Rows come out in
// kind/proportion/run/characterizer order.
inline std::vector<BenchmarkRow> benchmark(const Dataset& ds, const BenchmarkConfig& cfg) {
  require(cfg.runs >= 1, "runs must be positive");
  require(!cfg.kinds.empty() && !cfg.proportions.empty() && !cfg.characterizers.empty(),
          "benchmark grid is empty");
  const std::size_t cells = cfg.kinds.size() * cfg.proportions.size() * cfg.runs;
  std::vector<std::vector<BenchmarkRow>> results(cells);
  parallel_for(cells, [&](std::size_t cell) {
    const std::size_t run = cell % cfg.runs;
    const std::size_t pi = (cell / cfg.runs) % cfg.proportions.size();
    const std::size_t ki = cell / (cfg.runs * cfg.proportions.size());
    const HardnessKind kind = cfg.kinds[ki];
    const double p = cfg.proportions[pi];

    auto parts = stratified_partition(ds, {1.0 - cfg.reference_fraction, cfg.reference_fraction},
                                      derive_seed(cfg.seed, 1, run));
    Dataset work = std::move(parts[0]), reference = std::move(parts[1]);
    if (cfg.standardize) {
      auto st = standardize(work, {reference});
      work = std::move(st.train);
      reference = std::move(st.others[0]);
    }
    const auto perturbed = inject(work, kind, p, derive_seed(cfg.seed, 2, ki, pi, run), cfg);
    for (std::size_t c = 0; c < cfg.characterizers.size(); ++c) {
      const auto scores = characterize(cfg.characterizers[c], perturbed.data, reference, cfg,
                                       derive_seed(cfg.seed, 3, ki, pi, run, c));
      results[cell].push_back({kind, p, cfg.characterizers[c], run, auprc(scores, perturbed.record.flags)});
    }
  });
  std::vector<BenchmarkRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

// One summary per (kind, proportion, characterizer), in grid order.
inline std::vector<BenchmarkSummary> summarize(const std::vector<BenchmarkRow>& rows,
                                               const BenchmarkConfig& cfg) {
  std::vector<BenchmarkSummary> out;
  for (auto kind : cfg.kinds)
    for (double p : cfg.proportions)
      for (auto c : cfg.characterizers) {
        std::vector<double> vals;
        for (const auto& r : rows)
          if (r.kind == kind && r.proportion == p && r.characterizer == c) vals.push_back(r.auprc);
        if (vals.empty()) continue;
        const auto m = static_cast<double>(vals.size());
        const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / m;
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
        out.push_back({kind, p, c, mean, sd, sd / std::sqrt(m)});
      }
  return out;
}

}  // namespace hardshap
