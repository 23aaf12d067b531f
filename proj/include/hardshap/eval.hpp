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

// Downstream measurement: KNN probability classifier, ROC AUC / Gini,
// replicate confidence intervals and hardest-point removal curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hardshap/augment.hpp"
#include "hardshap/common.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/valuation.hpp"

namespace hardshap {

inline constexpr std::size_t kDefaultDownstreamK = 15;

// Share of label-1 rows among the K nearest training rows (ties by id).
inline std::vector<double> knn_predict_proba(const Dataset& train, const Dataset& query, std::size_t K) {
  require(K >= 1, "K must be positive");
  require(K <= train.size(), "K exceeds the number of training rows");
  require(train.dim() == query.dim(), "train and query dimensions differ");
  std::vector<double> out(query.size());
  parallel_for(query.size(), [&](std::size_t q) {
    std::vector<detail::Neighbor> cand(train.size());
    const auto x = query.row(q);
    for (std::size_t i = 0; i < train.size(); ++i)
      cand[i] = {squared_distance(train.row(i), x), train.id(i), static_cast<std::uint32_t>(i)};
    std::nth_element(cand.begin(), cand.begin() + static_cast<long>(K - 1), cand.end(), detail::neighbor_less);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < K; ++k) pos += train.label(cand[k].index);
    out[q] = static_cast<double>(pos) / static_cast<double>(K);
  });
  return out;
}

// Mann-Whitney AUC with mid-ranks: P(p+ > p-) + P(tie)/2.
inline double auc_roc(std::span<const double> probs, std::span<const Label> labels) {
  require(probs.size() == labels.size(), "probabilities and labels differ in length");
  const std::size_t n = probs.size();
  std::size_t pos = 0;
  for (Label y : labels) pos += y;
  require(pos > 0 && pos < n, "AUC needs both labels present");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k;
    while (end < n && probs[idx[end]] == probs[idx[k]]) ++end;
    const double mid_rank = 0.5 * static_cast<double>(k + 1 + end);  // mean of ranks k+1..end
    for (std::size_t t = k; t < end; ++t)
      if (labels[idx[t]] == 1) rank_sum += mid_rank;
    k = end;
  }
  const auto np = static_cast<double>(pos), nn = static_cast<double>(n - pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline double gini(std::span<const double> probs, std::span<const Label> labels) {
  return 2.0 * auc_roc(probs, labels) - 1.0;
}

struct MetricReport {
  std::string metric = "gini";
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> replicates;
};

// Mean with a normal-approximation 95% CI, mean +- 1.96 sd / sqrt(R), using
// the sample standard deviation.
inline MetricReport make_report(std::string metric, std::vector<double> replicates) {
  require(!replicates.empty(), "report needs at least one replicate");
  const auto r = static_cast<double>(replicates.size());
  const double mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / r;
  double half = 0.0;
  if (replicates.size() > 1) {
    double ss = 0.0;
    for (double v : replicates) ss += (v - mean) * (v - mean);
    half = 1.96 * std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
  }
  return {std::move(metric), mean, mean - half, mean + half, std::move(replicates)};
}

// One arm of the augmentation experiment.
struct PipelineConfig {
  double tau = 0.05;
  double amount = 1.0;
  GeneratorSpec generator;
  std::size_t downstream_k = kDefaultDownstreamK;
};

// Seed of replicate r; shared between arms so differences are paired.
inline std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t r) {
  return derive_seed(base_seed, 0x5EED, r);
}

inline double augmented_gini(const Dataset& train, const Dataset& valid, const ValuationScores& scores,
                             const PipelineConfig& cfg, std::uint64_t seed) {
  GeneratorSpec gen = cfg.generator;
  gen.seed = seed;
  const auto aug = targeted_augment(train, scores, cfg.tau, cfg.amount, gen);
  const auto probs = knn_predict_proba(aug.data, valid, cfg.downstream_k);
  return gini(probs, valid.labels());
}

// Augment -> fit -> score once per derived seed.
inline MetricReport repeated_gini(const Dataset& train, const Dataset& valid, const ValuationScores& scores,
                                  const PipelineConfig& cfg, std::size_t replicates, std::uint64_t base_seed) {
  require(replicates >= 1, "replicates must be positive");
  std::vector<double> values(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    values[r] = augmented_gini(train, valid, scores, cfg, replicate_seed(base_seed, r));
  });
  return make_report("gini", std::move(values));
}

enum class RemovalStrategy { kHardest, kRandom };

inline std::string_view to_string(RemovalStrategy s) {
  return s == RemovalStrategy::kHardest ? "hardest" : "random";
}

struct RemovalPoint {
  double fraction;
  double gini;
};

// Drops round(fraction * n) rows (hardest first, or a seeded uniform
// permutation prefix), refits the KNN classifier and scores `valid`.
inline std::vector<RemovalPoint> removal_curve(const Dataset& train, const Dataset& valid,
                                               const ValuationScores& scores, const std::vector<double>& fractions,
                                               RemovalStrategy strategy, std::uint64_t seed,
                                               std::size_t K = kDefaultDownstreamK) {
  require(!fractions.empty(), "no removal fractions given");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    require(fractions[i] >= 0.0 && fractions[i] < 1.0, "removal fractions must lie in [0,1)");
    require(i == 0 || fractions[i] > fractions[i - 1], "removal fractions must be ascending");
  }
  std::vector<std::size_t> order;
  if (strategy == RemovalStrategy::kHardest) {
    order = hardness_order(train, scores);
  } else {
    order.resize(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<RemovalPoint> out(fractions.size());
  parallel_for(fractions.size(), [&](std::size_t k) {
    const std::size_t drop = round_count(fractions[k] * static_cast<double>(train.size()));
    std::vector<std::size_t> keep(order.begin() + static_cast<long>(drop), order.end());
    std::sort(keep.begin(), keep.end());
    const Dataset kept = train.select(keep);
    require(kept.has_both_classes(), "removal leaves a single-class training set");
    out[k] = {fractions[k], gini(knn_predict_proba(kept, valid, std::min(K, kept.size())), valid.labels())};
  });
  return out;
}

}  // namespace hardshap
