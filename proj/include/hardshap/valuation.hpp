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

// Data valuation: exact KNN Shapley values via the backward recursion over the
// distance ranking, the brute-force data Shapley over all coalitions, and a
// truncated Monte Carlo permutation estimator. Lower value = harder point.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/dataset.hpp"

namespace hardshap {

enum class Method { kKnnShapley, kExactShapley, kTmcShapley, kDataIqConfidence, kRandom };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kKnnShapley: return "knn_shapley";
    case Method::kExactShapley: return "exact_shapley";
    case Method::kTmcShapley: return "tmc_shapley";
    case Method::kDataIqConfidence: return "dataiq_confidence";
    case Method::kRandom: return "random";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  for (auto m : {Method::kKnnShapley, Method::kExactShapley, Method::kTmcShapley,
                 Method::kDataIqConfidence, Method::kRandom})
    if (to_string(m) == s) return m;
  throw InvalidInput("unknown valuation method '" + std::string(s) + "'");
}

// Per-row scores aligned with the training rows (same order as `ids`).
struct ValuationScores {
  std::vector<double> scores;
  std::vector<RowId> ids;
  Method method = Method::kKnnShapley;
  std::map<std::string, std::string> params;
};

inline constexpr std::size_t kExactShapleyMaxRows = 16;

namespace detail {

struct Neighbor {
  double dist2;
  RowId id;
  std::uint32_t index;
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.id < b.id);
}

// Training rows sorted by increasing distance to `query`, ties by id.
inline void distance_order(const Dataset& train, std::span<const double> query,
                           std::vector<Neighbor>& out) {
  const std::size_t n = train.size();
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = {squared_distance(train.row(i), query), train.id(i), static_cast<std::uint32_t>(i)};
  std::sort(out.begin(), out.end(), neighbor_less);
}

inline void check_pair(const Dataset& train, const Dataset& test, std::size_t K) {
  require(K >= 1, "K must be positive");
  require(train.dim() == test.dim(), "train and test dimensions differ");
}

// Per-test KNN Shapley values written into `s` at each row's train index.
// Multiplier for the step at rank i (1-based) is min(K,i)/(iK); the base case
// uses the same multiplier at i = n, which reduces to 1/n when n >= K.
inline void knn_shapley_single(const Dataset& train, Label y_test, const std::vector<Neighbor>& order,
                               std::size_t K, std::span<double> s) {
  const std::size_t n = order.size();
  const auto kd = static_cast<double>(K);
  auto match = [&](std::size_t pos) {
    return train.label(order[pos].index) == y_test ? 1.0 : 0.0;
  };
  auto weight = [&](std::size_t i) {
    return static_cast<double>(std::min(K, i)) / (static_cast<double>(i) * kd);
  };
  double current = match(n - 1) * weight(n);
  s[order[n - 1].index] = current;
  for (std::size_t i = n - 1; i >= 1; --i) {
    current += (match(i - 1) - match(i)) * weight(i);
    s[order[i - 1].index] = current;
  }
}

}  // namespace detail

// Exact KNN Shapley values averaged over the test points. Test points are
// processed in parallel; the reduction runs in test order, so the output is
// independent of the thread count.
inline ValuationScores knn_shapley(const Dataset& train, const Dataset& test, std::size_t K) {
  detail::check_pair(train, test, K);
  const std::size_t n = train.size(), n_test = test.size();

  std::vector<double> total(n, 0.0);
  const std::size_t block = std::max<std::size_t>(1, 2 * thread_limit());
  std::vector<std::vector<double>> per_test(std::min(block, n_test), std::vector<double>(n));
  std::vector<std::vector<detail::Neighbor>> buffers(per_test.size());

  for (std::size_t start = 0; start < n_test; start += block) {
    const std::size_t count = std::min(block, n_test - start);
    parallel_for(count, [&](std::size_t b) {
      const std::size_t j = start + b;
      detail::distance_order(train, test.row(j), buffers[b]);
      detail::knn_shapley_single(train, test.label(j), buffers[b], K, per_test[b]);
    });
    // Fixed order over j for every i; chunks over i are independent.
    const std::size_t chunks = std::min<std::size_t>(n, 64);
    parallel_for(chunks, [&](std::size_t c) {
      const std::size_t lo = c * n / chunks, hi = (c + 1) * n / chunks;
      for (std::size_t b = 0; b < count; ++b)
        for (std::size_t i = lo; i < hi; ++i) total[i] += per_test[b][i];
    });
  }
  for (auto& v : total) v /= static_cast<double>(n_test);

  ValuationScores out{std::move(total), train.ids(), Method::kKnnShapley, {}};
  out.params["K"] = std::to_string(K);
  out.params["n_test"] = std::to_string(n_test);
  return out;
}

// Mean over test points of the matching-label share among the min(K,|S|)
// nearest members of S. The empty coalition is worth 0.
inline double knn_utility(std::span<const RowId> subset, const Dataset& train, const Dataset& test,
                          std::size_t K) {
  detail::check_pair(train, test, K);
  if (subset.empty()) return 0.0;
  std::unordered_map<RowId, std::size_t> index;
  for (std::size_t i = 0; i < train.size(); ++i) index.emplace(train.id(i), i);
  std::vector<std::size_t> rows;
  rows.reserve(subset.size());
  for (RowId id : subset) {
    auto it = index.find(id);
    require(it != index.end(), "unknown id " + std::to_string(id) + " in subset");
    rows.push_back(it->second);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  const Dataset members = train.select(rows);

  std::vector<detail::Neighbor> order;
  double total = 0.0;
  for (std::size_t j = 0; j < test.size(); ++j) {
    detail::distance_order(members, test.row(j), order);
    const std::size_t take = std::min(K, order.size());
    double hits = 0.0;
    for (std::size_t k = 0; k < take; ++k) hits += members.label(order[k].index) == test.label(j);
    total += hits / static_cast<double>(K);
  }
  return total / static_cast<double>(test.size());
}

namespace detail {

// Utility of every coalition of a small training set, indexed by bitmask
// over train row indices.
inline std::vector<double> all_coalition_utilities(const Dataset& train, const Dataset& test,
                                                   std::size_t K) {
  const std::size_t n = train.size();
  const std::size_t masks = std::size_t{1} << n;
  std::vector<double> value(masks, 0.0);
  std::vector<Neighbor> order;
  for (std::size_t j = 0; j < test.size(); ++j) {
    distance_order(train, test.row(j), order);
    std::vector<double> match(n);
    for (std::size_t p = 0; p < n; ++p) match[p] = train.label(order[p].index) == test.label(j);
    for (std::size_t mask = 1; mask < masks; ++mask) {
      double hits = 0.0;
      std::size_t taken = 0;
      for (std::size_t p = 0; p < n && taken < K; ++p) {
        if (mask >> order[p].index & 1U) {
          hits += match[p];
          ++taken;
        }
      }
      value[mask] += hits / static_cast<double>(K);
    }
  }
  for (auto& v : value) v /= static_cast<double>(test.size());
  return value;
}

}  // namespace detail

// Brute-force data Shapley with C = 1/n:
//   phi_i = (1/n) sum_{S subset of D\{i}} [V(S+i) - V(S)] / binom(n-1, |S|).
// Sums are accumulated per coalition size (ascending mask order inside a
// size) and then combined in ascending size order.
inline ValuationScores exact_data_shapley(const Dataset& train, const Dataset& test, std::size_t K) {
  detail::check_pair(train, test, K);
  const std::size_t n = train.size();
  require(n <= kExactShapleyMaxRows,
          "exact data Shapley is limited to " + std::to_string(kExactShapleyMaxRows) + " rows");
  const auto value = detail::all_coalition_utilities(train, test, K);

  std::vector<double> binom(n, 1.0);  // binom(n-1, s)
  for (std::size_t s = 1; s < n; ++s)
    binom[s] = binom[s - 1] * static_cast<double>(n - s) / static_cast<double>(s);

  std::vector<double> phi(n, 0.0);
  const std::size_t masks = std::size_t{1} << n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    std::vector<double> by_size(n, 0.0);
    for (std::size_t mask = 0; mask < masks; ++mask) {
      if (mask & bit) continue;
      by_size[static_cast<std::size_t>(std::popcount(mask))] += value[mask | bit] - value[mask];
    }
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) acc += by_size[s] / binom[s];
    phi[i] = acc / static_cast<double>(n);
  }
  ValuationScores out{std::move(phi), train.ids(), Method::kExactShapley, {}};
  out.params["K"] = std::to_string(K);
  return out;
}

namespace detail {

// Incremental KNN utility of a growing coalition: per test point, the ranks
// (in that test point's full ordering) of the K nearest members so far.
class IncrementalUtility {
 public:
  IncrementalUtility(const Dataset& train, const Dataset& test, std::size_t K)
      : n_(train.size()), n_test_(test.size()), K_(K), rank_(n_ * n_test_), match_at_rank_(n_ * n_test_) {
    std::vector<Neighbor> order;
    for (std::size_t j = 0; j < n_test_; ++j) {
      distance_order(train, test.row(j), order);
      for (std::size_t p = 0; p < n_; ++p) {
        rank_[j * n_ + order[p].index] = static_cast<std::uint32_t>(p);
        match_at_rank_[j * n_ + p] = train.label(order[p].index) == test.label(j);
      }
    }
    reset();
  }

  void reset() {
    top_.assign(n_test_, {});
    hits_ = 0;
  }

  double value() const {
    return static_cast<double>(hits_) / (static_cast<double>(K_) * static_cast<double>(n_test_));
  }

  void add(std::size_t row) {
    for (std::size_t j = 0; j < n_test_; ++j) {
      const std::uint32_t r = rank_[j * n_ + row];
      auto& top = top_[j];
      if (top.size() == K_) {
        if (r > top.back()) continue;
        hits_ -= match_at_rank_[j * n_ + top.back()];
        top.pop_back();
      }
      top.insert(std::upper_bound(top.begin(), top.end(), r), r);
      hits_ += match_at_rank_[j * n_ + r];
    }
  }

 private:
  std::size_t n_, n_test_, K_;
  std::vector<std::uint32_t> rank_;
  std::vector<std::uint8_t> match_at_rank_;
  std::vector<std::vector<std::uint32_t>> top_;
  long hits_ = 0;
};

}  // namespace detail

struct TmcOptions {
  std::size_t permutations = 0;  // 0 selects 100 * n
  double truncation_tol = 1e-4;
  std::uint64_t seed = 0;
};

// Truncated Monte Carlo data Shapley. Each permutation is scanned left to
// right; after each marginal is recorded the scan stops once the prefix
// utility is within `truncation_tol` of V(D), leaving later marginals at 0.
inline ValuationScores tmc_shapley(const Dataset& train, const Dataset& test, std::size_t K,
                                   const TmcOptions& options = {}) {
  detail::check_pair(train, test, K);
  require(options.truncation_tol >= 0.0, "truncation tolerance must be non-negative");
  const std::size_t n = train.size();
  const std::size_t perms = options.permutations == 0 ? 100 * n : options.permutations;

  detail::IncrementalUtility utility(train, test, K);
  for (std::size_t i = 0; i < n; ++i) utility.add(i);
  const double full = utility.value();

  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> perm(n);
  Rng rng(options.seed);
  for (std::size_t p = 0; p < perms; ++p) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    utility.reset();
    double prev = 0.0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      utility.add(perm[pos]);
      const double now = utility.value();
      sum[perm[pos]] += now - prev;
      prev = now;
      if (std::fabs(now - full) < options.truncation_tol) break;
    }
  }
  for (auto& v : sum) v /= static_cast<double>(perms);

  ValuationScores out{std::move(sum), train.ids(), Method::kTmcShapley, {}};
  out.params["K"] = std::to_string(K);
  out.params["permutations"] = std::to_string(perms);
  out.params["truncation_tol"] = std::to_string(options.truncation_tol);
  out.params["seed"] = std::to_string(options.seed);
  return out;
}

// Ids sorted by ascending score (hardest first), ties by ascending id.
inline std::vector<RowId> rank_by_hardness(const ValuationScores& scores) {
  require(scores.scores.size() == scores.ids.size(), "scores and ids differ in length");
  std::vector<std::size_t> idx(scores.scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (double v : scores.scores) require(std::isfinite(v), "non-finite score");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] < scores.scores[b];
    return scores.ids[a] < scores.ids[b];
  });
  std::vector<RowId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(scores.ids[i]);
  return out;
}

// Row positions of `ds` in hardness order. Scores must be aligned with ds.
inline std::vector<std::size_t> hardness_order(const Dataset& ds, const ValuationScores& scores) {
  require(scores.scores.size() == ds.size(), "scores are not aligned with the dataset");
  std::unordered_map<RowId, std::size_t> pos;
  for (std::size_t i = 0; i < ds.size(); ++i) pos.emplace(ds.id(i), i);
  std::vector<std::size_t> rows;
  rows.reserve(ds.size());
  for (RowId id : rank_by_hardness(scores)) {
    auto it = pos.find(id);
    require(it != pos.end(), "score id " + std::to_string(id) + " not in dataset");
    rows.push_back(it->second);
  }
  return rows;
}

// The ceil(tau * n) lowest-scoring rows, hardest first.
inline Dataset hardest_subset(const Dataset& ds, const ValuationScores& scores, double tau) {
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0,1]");
  auto rows = hardness_order(ds, scores);
  rows.resize(std::min(rows.size(), ceil_count(tau * static_cast<double>(ds.size()))));
  return ds.select(rows);
}

}  // namespace hardshap
