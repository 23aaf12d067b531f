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

#include "hardshap/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "hardshap/sim.hpp"
#include "test_util.hpp"

namespace hardshap {
namespace {

using testing::random_dataset;

// Mean over flagged rows of the precision at that row's score threshold.
double oracle_ap(const std::vector<double>& scores, const std::vector<bool>& flags) {
  double acc = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!flags[i]) continue;
    ++positives;
    std::size_t at_or_below = 0, flagged = 0;
    for (std::size_t k = 0; k < scores.size(); ++k)
      if (scores[k] <= scores[i]) {
        ++at_or_below;
        flagged += flags[k];
      }
    acc += static_cast<double>(flagged) / static_cast<double>(at_or_below);
  }
  return acc / static_cast<double>(positives);
}

Dataset standardized_blobs(std::size_t n, std::uint64_t seed) {
  BlobConfig cfg;
  cfg.n_train = n;
  cfg.n_valid = 1;
  cfg.n_test = 1;
  cfg.seed = seed;
  return standardize(gen_blobs(cfg).train).train;
}

void expect_only_flagged_rows_change(const Dataset& before, const Perturbed& after) {
  ASSERT_EQ(before.size(), after.data.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (after.record.flags[i]) continue;
    EXPECT_EQ(before.label(i), after.data.label(i));
    for (std::size_t f = 0; f < before.dim(); ++f) EXPECT_EQ(before.at(i, f), after.data.at(i, f));
  }
  EXPECT_EQ(before.ids(), after.data.ids());
}

TEST(Mislabel, FlipsExactlyTheFlaggedRows) {
  const Dataset ds = random_dataset(100, 2, 1);
  const auto out = mislabel(ds, 0.1, 7);
  EXPECT_EQ(out.record.count(), 10u);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(out.data.label(i) != ds.label(i), static_cast<bool>(out.record.flags[i]));
  expect_only_flagged_rows_change(ds, out);
  EXPECT_EQ(ds.features(), out.data.features());
}

TEST(Mislabel, DeterministicAndInvolutive) {
  const Dataset ds = random_dataset(100, 2, 1);
  EXPECT_EQ(mislabel(ds, 0.1, 7).record.flags, mislabel(ds, 0.1, 7).record.flags);
  EXPECT_NE(mislabel(ds, 0.1, 7).record.flags, mislabel(ds, 0.1, 8).record.flags);
  const auto out = mislabel(ds, 0.2, 3);
  EXPECT_TRUE(apply_flips(out.data, out.record) == ds);
}

TEST(Mislabel, RejectsDegenerateCounts) {
  const Dataset ds = random_dataset(10, 1, 1);
  EXPECT_THROW(mislabel(ds, 0.01, 0), InvalidInput);
  EXPECT_THROW(mislabel(ds, 0.99, 0), InvalidInput);
  EXPECT_THROW(mislabel(ds, 0.0, 0), InvalidInput);
}

TEST(OodShift, DisplacementHasFixedStandardizedLength) {
  const Dataset ds = random_dataset(200, 3, 4);
  const auto sigma = Standardizer::fit(ds).stddevs;
  const auto out = ood_shift(ds, 0.1, 5.0, 9);
  EXPECT_EQ(out.record.count(), 20u);
  expect_only_flagged_rows_change(ds, out);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!out.record.flags[i]) continue;
    double z2 = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      const double z = (out.data.at(i, f) - ds.at(i, f)) / sigma[f];
      z2 += z * z;
    }
    EXPECT_NEAR(std::sqrt(z2), 5.0, 1e-9);
  }
}

TEST(OodShift, ShiftedRowsLeaveTheBulk) {
  const Dataset ds = standardized_blobs(2000, 3);
  const auto out = ood_shift(ds, 0.1, 5.0, 1);
  std::vector<double> clean;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!out.record.flags[i]) clean.push_back(std::hypot(ds.at(i, 0), ds.at(i, 1)));
  const double q99 = empirical_quantile(clean, 0.99);
  // A row on the rim can be pushed back across the centre, so this is a
  // statement about the shifted rows as a group.
  std::vector<double> shifted;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (out.record.flags[i]) shifted.push_back(std::hypot(out.data.at(i, 0), out.data.at(i, 1)));
  const auto beyond = std::count_if(shifted.begin(), shifted.end(), [&](double r) { return r > q99; });
  EXPECT_GE(static_cast<double>(beyond), 0.99 * static_cast<double>(shifted.size()));
  EXPECT_GT(empirical_quantile(shifted, 0.5), 2.0 * q99);
}

TEST(OodShift, RejectsZeroMagnitude) {
  EXPECT_THROW(ood_shift(random_dataset(50, 2, 1), 0.1, 0.0, 0), InvalidInput);
}

TEST(EmpiricalQuantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0}, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({0.0, 10.0}, 0.25), 2.5);
}

TEST(AtypicalScale, PushesRowsToTheTail) {
  const Dataset ds = standardized_blobs(1000, 5);
  const double p = 0.1;
  const auto out = atypical_scale(ds, p, 0.99, 2);
  expect_only_flagged_rows_change(ds, out);
  for (Label cls : {Label{0}, Label{1}}) {
    const auto g = ClassGeometry::fit(ds, cls);
    std::vector<double> radii;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.label(i) == cls) radii.push_back(g.radius(ds.row(i)));
    const double q = empirical_quantile(radii, 1.0 - p);
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (out.record.flags[i] && ds.label(i) == cls) EXPECT_GE(g.radius(out.data.row(i)), q - 1e-9);
  }
}

TEST(AtypicalScale, RowAtTargetRadiusIsUnchanged) {
  // Every member sits at radius sqrt(2) from its class mean, so the target
  // radius equals the current one for any quantile.
  const Dataset ds = Dataset::from_rows({{1, 1}, {1, -1}, {-1, 1}, {-1, -1}, {6, 6}, {6, 4}, {4, 6}, {4, 4}},
                                        {0, 0, 0, 0, 1, 1, 1, 1});
  const auto out = atypical_scale(ds, 0.5, 0.9, 3);
  EXPECT_EQ(out.record.count(), 4u);
  for (std::size_t k = 0; k < ds.features().size(); ++k)
    EXPECT_NEAR(out.data.features()[k], ds.features()[k], 1e-12);
}

TEST(AtypicalScale, Errors) {
  const Dataset lone = Dataset::from_rows({{0.0}, {1.0}, {2.0}, {3.0}}, {1, 0, 0, 0});
  EXPECT_THROW(atypical_scale(lone, 0.5, 0.9, 0), InvalidInput);
  EXPECT_THROW(atypical_scale(random_dataset(20, 2, 0), 0.2, 1.0, 0), InvalidInput);
}

TEST(Auprc, ContractCases) {
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, {true, false, true, false}), 1.0);
  EXPECT_NEAR(auprc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, {false, true, false, true}), 5.0 / 12.0, 1e-15);
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>(10, 0.3), {true, false, false, true, false, false, false, false, false,
                                                        false}),
                   0.2);
  EXPECT_THROW(auprc(std::vector<double>{1, 2}, {true, true}), InvalidInput);
  EXPECT_THROW(auprc(std::vector<double>{1, 2}, {false, false}), InvalidInput);
}

TEST(Auprc, MatchesOracleWithTies) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> s(n);
    std::vector<bool> f(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(trial % 2 ? 5 : 1000));
      f[i] = rng.below(3) == 0;
    }
    f[0] = true;
    f[1] = false;
    EXPECT_NEAR(auprc(s, f), oracle_ap(s, f), 1e-12);
  }
}

TEST(Auprc, MonotoneTransformInvariant) {
  Rng rng(3);
  std::vector<double> s(50), t(50);
  std::vector<bool> f(50);
  for (std::size_t i = 0; i < 50; ++i) {
    s[i] = rng.normal();
    t[i] = std::exp(3.0 * s[i]) - 7.0;
    f[i] = i % 4 == 0;
  }
  EXPECT_DOUBLE_EQ(auprc(s, f), auprc(t, f));
}

TEST(Auprc, DegradesAsAFlaggedRowSinks) {
  // Flagged rows start at ranks 0..4; the last one moves down step by step.
  const std::size_t n = 20;
  std::vector<bool> f(n, false);
  for (std::size_t i = 0; i < 5; ++i) f[i] = true;
  std::vector<double> s(n);
  std::iota(s.begin(), s.end(), 0.0);
  double prev = auprc(s, f);
  EXPECT_DOUBLE_EQ(prev, 1.0);
  for (std::size_t pos = 4; pos + 1 < n; ++pos) {
    s[4] = static_cast<double>(pos) + 1.5;  // just below row pos + 2
    const double now = auprc(s, f);
    EXPECT_LT(now, prev);
    prev = now;
  }
}

TEST(Benchmark, GridShape) {
  const Dataset ds = standardized_blobs(300, 1);
  BenchmarkConfig cfg;
  cfg.runs = 1;
  cfg.dataiq_checkpoints = 3;
  const auto rows = benchmark(ds, cfg);
  EXPECT_EQ(rows.size(), 3u * 4u * 3u);
  const auto summary = summarize(rows, cfg);
  EXPECT_EQ(summary.size(), 3u * 4u * 3u);
  for (const auto& r : rows) {
    EXPECT_GE(r.auprc, 0.0);
    EXPECT_LE(r.auprc, 1.0);
  }
}

TEST(Benchmark, Deterministic) {
  const Dataset ds = standardized_blobs(300, 2);
  BenchmarkConfig cfg;
  cfg.runs = 2;
  cfg.proportions = {0.1};
  cfg.dataiq_checkpoints = 3;
  set_thread_limit(1);
  const auto a = benchmark(ds, cfg);
  set_thread_limit(8);
  const auto b = benchmark(ds, cfg);
  set_thread_limit(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].auprc, b[i].auprc);
}

TEST(Benchmark, RandomBaselineNearPrevalence) {
  BlobConfig b;
  b.n_train = 2000;
  const Dataset ds = gen_blobs(b).train;
  BenchmarkConfig cfg;
  cfg.kinds = {HardnessKind::kMislabeling};
  cfg.proportions = {0.1};
  cfg.characterizers = {Characterizer::kRandom, Characterizer::kKnnShapley};
  cfg.runs = 5;
  const auto summary = summarize(benchmark(ds, cfg), cfg);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_LE(std::fabs(summary[0].mean_auprc - 0.1), 3.0 * summary[0].std_error);
  EXPECT_GT(summary[1].mean_auprc, 0.5);
}

TEST(Benchmark, NamesRoundTrip) {
  for (auto k : {HardnessKind::kMislabeling, HardnessKind::kOod, HardnessKind::kAtypical})
    EXPECT_EQ(hardness_kind_from_string(to_string(k)), k);
  for (auto c : {Characterizer::kKnnShapley, Characterizer::kDataIq, Characterizer::kRandom})
    EXPECT_EQ(characterizer_from_string(to_string(c)), c);
  EXPECT_THROW(hardness_kind_from_string("noise"), InvalidInput);
}

}  // namespace
}  // namespace hardshap
