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

// Simulated data: the four-component bivariate Gaussian blobs, the
// two-normal univariate mixture, and the closed-form 1NN Shapley analytics on
// the three-point training set {(-1,0), (x_train,0), (1,1)}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/valuation.hpp"

namespace hardshap {

struct BlobConfig {
  // Components 0,1 carry label 0 and sit on one diagonal; 2,3 carry label 1.
  std::array<std::array<double, 2>, 4> means{{{2.0, 2.0}, {-2.0, -2.0}, {2.0, -2.0}, {-2.0, 2.0}}};
  std::array<Label, 4> labels{0, 0, 1, 1};
  double scale = 1.0;  // stddev of each coordinate
  std::size_t n_train = 5000;
  std::size_t n_valid = 2500;
  std::size_t n_test = 2500;
  std::uint64_t seed = 0;
};

struct BlobSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Each point picks a component uniformly, then adds N(0, scale^2 I). Ids run
// consecutively across train, valid and test.
inline BlobSplits gen_blobs(const BlobConfig& cfg) {
  require(cfg.n_train >= 1 && cfg.n_valid >= 1 && cfg.n_test >= 1, "blob split sizes must be positive");
  require(cfg.scale >= 0.0, "blob scale must be non-negative");
  int per_label[2] = {0, 0};
  for (Label y : cfg.labels) {
    require(y <= 1, "blob labels must be 0 or 1");
    ++per_label[y];
  }
  require(per_label[0] == 2 && per_label[1] == 2, "blobs need two components per label");

  Rng rng(cfg.seed);
  RowId next_id = 0;
  auto draw = [&](std::size_t n) {
    std::vector<double> feats(2 * n);
    std::vector<Label> labels(n);
    std::vector<RowId> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(rng.below(4));
      feats[2 * i] = cfg.means[c][0] + cfg.scale * rng.normal();
      feats[2 * i + 1] = cfg.means[c][1] + cfg.scale * rng.normal();
      labels[i] = cfg.labels[c];
      ids[i] = next_id++;
    }
    return Dataset(2, std::move(feats), std::move(labels), std::move(ids), {"x0", "x1"}, "y");
  };
  Dataset train = draw(cfg.n_train);
  Dataset valid = draw(cfg.n_valid);
  Dataset test = draw(cfg.n_test);
  return {std::move(train), std::move(valid), std::move(test)};
}

// Labels Bernoulli(1/2), features N(2y - 1, 1).
inline Dataset gen_toy_mixture(std::size_t n, std::uint64_t seed) {
  require(n >= 2, "mixture needs at least two points");
  Rng rng(seed);
  std::vector<double> x(n);
  std::vector<Label> y(n);
  std::vector<RowId> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.5 ? 0 : 1;
    x[i] = (2.0 * y[i] - 1.0) + rng.normal();
    ids[i] = i;
  }
  return Dataset(1, std::move(x), std::move(y), std::move(ids), {"x"}, "y");
}

// ---------------------------------------------------------------------------
// Toy 1NN analytics.

struct ToyShapleys {
  double s_minus;  // point (-1, 0)
  double s_train;  // point (x_train, 0)
  double s_plus;   // point (1, 1)
};

inline Dataset toy_training_set(double x_train) {
  return Dataset(1, {-1.0, x_train, 1.0}, {0, 0, 1}, {0, 1, 2}, {"x"}, "y");
}

// Per-test 1NN Shapley triple via the KNN recursion; ties follow the order
// (-1, x_train, +1).
inline ToyShapleys toy_1nn_shapleys(double x_train, double x_test, Label y_test) {
  const Dataset train = toy_training_set(x_train);
  const Dataset test(1, {x_test}, {y_test}, {0}, {"x"}, "y");
  const auto s = knn_shapley(train, test, 1).scores;
  return {s[0], s[1], s[2]};
}

struct ToyTableRow {
  double lower;  // interval of x_test (infinite ends allowed)
  double upper;
  double representative;
  Label y_test;
  ToyShapleys shapleys;
};

// One row per (interval, y_test), where the intervals are cut at the pairwise
// midpoints of {-1, x_train, 1}; inside an interval the distance ranking, and
// hence the triple, is constant.
inline std::vector<ToyTableRow> toy_table(double x_train) {
  std::vector<double> cuts{(x_train - 1.0) / 2.0, 0.0, (x_train + 1.0) / 2.0};
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> bounds{-inf};
  bounds.insert(bounds.end(), cuts.begin(), cuts.end());
  bounds.push_back(inf);
  const double span = std::max(2.0, cuts.back() - cuts.front());

  std::vector<ToyTableRow> rows;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const double lo = bounds[k], hi = bounds[k + 1];
    double rep;
    if (std::isinf(lo)) rep = hi - span - 1.0;
    else if (std::isinf(hi)) rep = lo + span + 1.0;
    else rep = 0.5 * (lo + hi);
    for (Label y : {Label{0}, Label{1}}) rows.push_back({lo, hi, rep, y, toy_1nn_shapleys(x_train, rep, y)});
  }
  return rows;
}

struct QuadratureGrid {
  double lower = -8.0;
  double upper = 8.0;
  double step = 1e-3;
};

inline double normal_pdf(double x, double mean) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x, double mean) { return 0.5 * std::erfc(-(x - mean) / std::numbers::sqrt2); }

// Mixture mass outside [lower, upper] for 1/2 N(-1,1) + 1/2 N(1,1).
inline double toy_tail_mass(double lower, double upper) {
  double mass = 0.0;
  for (double m : {-1.0, 1.0}) mass += 0.5 * (normal_cdf(lower, m) + 1.0 - normal_cdf(upper, m));
  return mass;
}

// E[s_train] = 1/2 sum_y int s_train(x, y) N(x; 2y-1, 1) dx by the
// trapezoidal rule. Chunks are summed in a fixed order.
inline double toy_expected_shapley(double x_train, const QuadratureGrid& grid = {}) {
  require(grid.step > 0.0 && grid.upper > grid.lower, "invalid quadrature grid");
  require(toy_tail_mass(grid.lower, grid.upper) <= 1e-6, "quadrature grid excludes more than 1e-6 tail mass");
  const auto intervals = static_cast<std::size_t>(std::llround((grid.upper - grid.lower) / grid.step));
  require(intervals >= 1, "quadrature grid has no intervals");
  const double h = (grid.upper - grid.lower) / static_cast<double>(intervals);

  auto integrand = [&](double x) {
    const auto s0 = toy_1nn_shapleys(x_train, x, 0).s_train;
    const auto s1 = toy_1nn_shapleys(x_train, x, 1).s_train;
    return 0.5 * (s0 * normal_pdf(x, -1.0) + s1 * normal_pdf(x, 1.0));
  };

  const std::size_t nodes = intervals + 1;
  const std::size_t chunks = std::min<std::size_t>(64, nodes);
  std::vector<double> partial(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * nodes / chunks, hi = (c + 1) * nodes / chunks;
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double w = (k == 0 || k == intervals) ? 0.5 : 1.0;
      acc += w * integrand(grid.lower + h * static_cast<double>(k));
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total * h;
}

}  // namespace hardshap
