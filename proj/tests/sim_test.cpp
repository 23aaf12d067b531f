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

#include "hardshap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"

namespace hardshap {
namespace {

constexpr double kExact = 1e-12;

void expect_triple(const ToyShapleys& s, double a, double b, double c) {
  EXPECT_NEAR(s.s_minus, a, kExact);
  EXPECT_NEAR(s.s_train, b, kExact);
  EXPECT_NEAR(s.s_plus, c, kExact);
}

TEST(Toy, TableRowsAtOrigin) {
  expect_triple(toy_1nn_shapleys(0.0, 0.25, 0), 1.0 / 3, 5.0 / 6, -1.0 / 6);
  expect_triple(toy_1nn_shapleys(0.0, 3.0, 1), 0.0, 0.0, 1.0);
  expect_triple(toy_1nn_shapleys(0.0, -3.0, 0), 0.5, 0.5, 0.0);
  expect_triple(toy_1nn_shapleys(0.0, -3.0, 1), -1.0 / 6, -1.0 / 6, 1.0 / 3);
  expect_triple(toy_1nn_shapleys(0.0, 0.25, 1), 0.0, -0.5, 0.5);
  expect_triple(toy_1nn_shapleys(0.0, 3.0, 0), 1.0 / 3, 1.0 / 3, -2.0 / 3);
}

TEST(Toy, TableHasEightRows) {
  const auto rows = toy_table(0.0);
  ASSERT_EQ(rows.size(), 8u);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(rows[0].lower, -inf);
  EXPECT_EQ(rows[0].upper, -0.5);
  EXPECT_EQ(rows[7].upper, inf);
  for (const auto& r : rows) {
    EXPECT_GT(r.representative, r.lower);
    EXPECT_LT(r.representative, r.upper);
    // Efficiency: the three values add up to the 1NN utility of the full set.
    const double nearest_label = r.representative < -0.5 ? 0 : (r.representative < 0.5 ? 0 : 1);
    EXPECT_NEAR(r.shapleys.s_minus + r.shapleys.s_train + r.shapleys.s_plus,
                nearest_label == r.y_test ? 1.0 : 0.0, kExact);
  }
}

// Independent evaluation: s_train is constant between the cut points, so
// the integral is a sum of normal interval masses.
double analytic_expected_shapley(double x_train) {
  std::vector<double> cuts{(x_train - 1.0) / 2.0, 0.0, (x_train + 1.0) / 2.0};
  std::sort(cuts.begin(), cuts.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> b{-inf};
  b.insert(b.end(), cuts.begin(), cuts.end());
  b.push_back(inf);
  auto cdf = [](double x, double m) {
    if (std::isinf(x)) return x < 0 ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - m) / std::sqrt(2.0));
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    if (b[k + 1] <= b[k]) continue;
    double rep;
    if (std::isinf(b[k])) rep = b[k + 1] - 1.0;
    else if (std::isinf(b[k + 1])) rep = b[k] + 1.0;
    else rep = 0.5 * (b[k] + b[k + 1]);
    for (Label y : {Label{0}, Label{1}}) {
      const double mean = y == 0 ? -1.0 : 1.0;
      const Dataset train = toy_training_set(x_train);
      const Dataset test(1, {rep}, {y}, {0}, {"x"}, "y");
      const double s = exact_data_shapley(train, test, 1).scores[1];
      total += 0.5 * s * (cdf(b[k + 1], mean) - cdf(b[k], mean));
    }
  }
  return total;
}

TEST(Toy, ExpectedShapleyAtOrigin) {
  const double v = toy_expected_shapley(0.0);
  EXPECT_NEAR(v, 0.209, 0.002);
  EXPECT_NEAR(v, analytic_expected_shapley(0.0), 1e-4);
}

TEST(Toy, QuadratureMatchesAnalyticIntegral) {
  for (double x : {-2.0, -1.0, -0.3, 0.5, 1.5, 3.0}) EXPECT_NEAR(toy_expected_shapley(x), analytic_expected_shapley(x), 1e-4) << x;
}

TEST(Toy, QuadratureRefinementIsStable) {
  const double coarse = toy_expected_shapley(0.0);
  const double fine = toy_expected_shapley(0.0, {-8.0, 8.0, 5e-4});
  EXPECT_LT(std::fabs(coarse - fine), 1e-4);
}

TEST(Toy, DecreasesWhileTrainPointMovesTowardOtherClass) {
  double prev = toy_expected_shapley(-1.0);
  for (double x : {-0.5, 0.0, 0.5}) {
    const double v = toy_expected_shapley(x);
    EXPECT_LT(v, prev) << x;
    prev = v;
  }
}

TEST(Toy, RejectsNarrowGrid) {
  EXPECT_THROW(toy_expected_shapley(0.0, {-3.0, 3.0, 1e-3}), InvalidInput);
  EXPECT_THROW(toy_expected_shapley(0.0, {-8.0, 8.0, 0.0}), InvalidInput);
}

TEST(Blobs, DefaultSizesAndIds) {
  const auto b = gen_blobs({});
  EXPECT_EQ(b.train.size(), 5000u);
  EXPECT_EQ(b.valid.size(), 2500u);
  EXPECT_EQ(b.test.size(), 2500u);
  EXPECT_EQ(b.train.id(0), 0u);
  EXPECT_EQ(b.valid.id(0), 5000u);
  EXPECT_EQ(b.test.id(2499), 9999u);
  const double n = 5000.0;
  const double prevalence = static_cast<double>(b.train.positives()) / n;
  EXPECT_LE(std::fabs(prevalence - 0.5), 3.0 * std::sqrt(n) / (2.0 * n));
}

TEST(Blobs, ZeroScaleSitsOnMeans) {
  BlobConfig cfg;
  cfg.scale = 0.0;
  cfg.n_train = 200;
  const auto b = gen_blobs(cfg);
  for (std::size_t i = 0; i < b.train.size(); ++i) {
    const double x = b.train.at(i, 0), y = b.train.at(i, 1);
    EXPECT_EQ(std::fabs(x), 2.0);
    EXPECT_EQ(std::fabs(y), 2.0);
    // Same-sign corners carry label 0.
    EXPECT_EQ(b.train.label(i), (x > 0) == (y > 0) ? 0 : 1);
  }
}

TEST(Blobs, SeededDeterminism) {
  BlobConfig a, c;
  c.seed = 1;
  EXPECT_TRUE(gen_blobs(a).train == gen_blobs(a).train);
  EXPECT_FALSE(gen_blobs(a).train == gen_blobs(c).train);
}

TEST(ToyMixture, ClassConditionalMeans) {
  const Dataset ds = gen_toy_mixture(20000, 3);
  double s[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    s[ds.label(i)] += ds.at(i, 0);
    n[ds.label(i)] += 1;
  }
  EXPECT_NEAR(s[0] / n[0], -1.0, 0.05);
  EXPECT_NEAR(s[1] / n[1], 1.0, 0.05);
  EXPECT_NEAR(n[1] / 20000.0, 0.5, 0.02);
}

}  // namespace
}  // namespace hardshap
