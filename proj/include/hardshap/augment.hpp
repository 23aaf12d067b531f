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

// Synthetic rows for the hardest points: SMOTE, a file-exchange hook for
// external generators, targeted augmentation, and the weighted KS fidelity
// statistic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/csv.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/valuation.hpp"

namespace hardshap {

enum class GeneratorKind { kSmote, kExternal };

inline std::string_view to_string(GeneratorKind k) {
  return k == GeneratorKind::kSmote ? "smote" : "external";
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kSmote;
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
  // External generators only.
  std::filesystem::path exchange_in;   // hard subset written here
  std::filesystem::path exchange_out;  // synthetic rows read from here
  std::string command;                 // optional; {in} {out} {m} {seed} are substituted
};

struct Provenance {
  GeneratorKind kind = GeneratorKind::kSmote;
  std::uint64_t seed = 0;
  std::vector<RowId> source_ids;
};

// Generated rows; ids are fresh (disjoint from the source's).
struct SyntheticBatch {
  Dataset rows;
  Provenance provenance;

  std::size_t size() const { return rows.size(); }
};

// Splits m over the classes of `source` by largest remainder on prevalence.
inline std::vector<std::size_t> proportional_allocation(const Dataset& source, std::size_t m) {
  const auto n = static_cast<double>(source.size());
  const double counts[2] = {n - static_cast<double>(source.positives()),
                            static_cast<double>(source.positives())};
  std::vector<std::size_t> alloc(2);
  double rem[2];
  std::size_t dealt = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(m) * counts[c] / n;
    alloc[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[c] = exact - static_cast<double>(alloc[c]);
    dealt += alloc[c];
  }
  while (dealt < m) {
    const int c = rem[1] > rem[0] ? 1 : 0;
    ++alloc[c];
    rem[c] = -1.0;
    ++dealt;
  }
  return alloc;
}

// SMOTE with a pluggable interpolation draw: `gap(rng)` returns the
// position u in [0, 1] along the segment from the seed row to its neighbor.
// Synthetic row r uses its own generator seeded with derive_seed(seed, r).
template <typename GapFn>
SyntheticBatch smote_generate_with(const Dataset& source, std::size_t m, std::size_t k_neighbors,
                                   std::uint64_t seed, GapFn gap, RowId first_id) {
  require(m >= 1, "number of synthetic rows must be positive");
  require(k_neighbors >= 1, "SMOTE needs k_neighbors >= 1");
  const std::size_t d = source.dim();
  const auto alloc = proportional_allocation(source, m);

  std::vector<std::vector<std::size_t>> members(2);
  for (std::size_t i = 0; i < source.size(); ++i) members[source.label(i)].push_back(i);

  // Same-class k nearest neighbors of every member (ties by id).
  std::vector<std::vector<std::size_t>> neighbors(source.size());
  for (Label cls : {Label{0}, Label{1}}) {
    if (alloc[cls] == 0) continue;
    const auto& mem = members[cls];
    require(mem.size() >= k_neighbors + 1,
            "class " + std::to_string(cls) + " has " + std::to_string(mem.size()) +
                " rows; SMOTE needs at least k_neighbors + 1 = " + std::to_string(k_neighbors + 1));
    parallel_for(mem.size(), [&](std::size_t a) {
      std::vector<detail::Neighbor> cand;
      cand.reserve(mem.size() - 1);
      for (auto b : mem)
        if (b != mem[a])
          cand.push_back({squared_distance(source.row(b), source.row(mem[a])), source.id(b),
                          static_cast<std::uint32_t>(b)});
      std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k_neighbors), cand.end(),
                        detail::neighbor_less);
      auto& out = neighbors[mem[a]];
      for (std::size_t k = 0; k < k_neighbors; ++k) out.push_back(cand[k].index);
    });
  }

  std::vector<double> feats(m * d);
  std::vector<Label> labels(m);
  std::vector<RowId> ids(m);
  parallel_for(m, [&](std::size_t r) {
    const Label cls = r < alloc[0] ? Label{0} : Label{1};
    Rng rng(derive_seed(seed, r));
    const auto& mem = members[cls];
    const std::size_t base = mem[rng.below(mem.size())];
    const std::size_t nn = neighbors[base][rng.below(k_neighbors)];
    const double u = gap(rng);
    for (std::size_t f = 0; f < d; ++f)
      feats[r * d + f] = source.at(base, f) + u * (source.at(nn, f) - source.at(base, f));
    labels[r] = cls;
    ids[r] = first_id + r;
  });
  return {Dataset(d, std::move(feats), std::move(labels), std::move(ids), source.feature_names(),
                  source.label_name()),
          {GeneratorKind::kSmote, seed, source.ids()}};
}

inline SyntheticBatch smote_generate(const Dataset& source, std::size_t m, std::size_t k_neighbors,
                                     std::uint64_t seed) {
  return smote_generate_with(source, m, k_neighbors, seed, [](Rng& rng) { return rng.uniform(); },
                             source.max_id() + 1);
}

namespace detail {

inline std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

}  // namespace detail

// File-exchange generator: writes `source` to spec.exchange_in, runs
// spec.command when given, then ingests spec.exchange_out. The synthetic file
// uses the dataset layout; its ids are replaced by fresh ones.
inline SyntheticBatch external_generate(const Dataset& source, std::size_t m, const GeneratorSpec& spec,
                                        RowId first_id) {
  require(!spec.exchange_in.empty() && !spec.exchange_out.empty(),
          "external generator needs both exchange paths");
  save_csv(source, spec.exchange_in);
  if (!spec.command.empty()) {
    std::string cmd = spec.command;
    cmd = detail::substitute(cmd, "{in}", spec.exchange_in.string());
    cmd = detail::substitute(cmd, "{out}", spec.exchange_out.string());
    cmd = detail::substitute(cmd, "{m}", std::to_string(m));
    cmd = detail::substitute(cmd, "{seed}", std::to_string(spec.seed));
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("external generator failed: " + cmd);
  }
  if (!std::filesystem::exists(spec.exchange_out))
    throw std::runtime_error("external generator output not found: " + spec.exchange_out.string());
  const Dataset synth = load_csv(spec.exchange_out, source.label_name());
  require(synth.feature_names() == source.feature_names(),
          "external generator output has different feature columns");
  const bool has0 = source.positives() < source.size(), has1 = source.positives() > 0;
  for (Label y : synth.labels())
    require((y == 0 && has0) || (y == 1 && has1), "external generator produced a label absent from the source");
  std::vector<RowId> ids(synth.size());
  std::iota(ids.begin(), ids.end(), first_id);
  return {Dataset(synth.dim(), synth.features(), synth.labels(), std::move(ids), source.feature_names(),
                  source.label_name()),
          {GeneratorKind::kExternal, spec.seed, source.ids()}};
}

struct Augmentation {
  Dataset data;          // original rows followed by the synthetic ones
  SyntheticBatch batch;
  Dataset hard_subset;
};

inline std::size_t synthetic_count(std::size_t n, double tau, double amount) {
  return round_count(amount * static_cast<double>(ceil_count(tau * static_cast<double>(n))));
}

// Fits the generator on the ceil(tau*n) hardest rows, draws
// round(amount * ceil(tau*n)) rows and appends them to `train`.
inline Augmentation targeted_augment(const Dataset& train, const ValuationScores& scores, double tau,
                                     double amount, const GeneratorSpec& gen) {
  require(amount > 0.0, "augmentation amount must be positive");
  Dataset hard = hardest_subset(train, scores, tau);
  const std::size_t m = round_count(amount * static_cast<double>(hard.size()));
  require(m >= 1, "augmentation amount yields zero synthetic rows");
  const RowId first_id = train.max_id() + 1;
  SyntheticBatch batch =
      gen.kind == GeneratorKind::kSmote
          ? smote_generate_with(hard, m, gen.k_neighbors, gen.seed, [](Rng& rng) { return rng.uniform(); },
                                first_id)
          : external_generate(hard, m, gen, first_id);
  Dataset combined = concat(train, batch.rows);
  return {std::move(combined), std::move(batch), std::move(hard)};
}

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "KS statistic needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

inline std::vector<double> column(const Dataset& ds, std::size_t f) {
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = ds.at(i, f);
  return out;
}

// sum_f w_f KS_f / sum_f w_f. Empty weights mean uniform.
inline double weighted_ks(const Dataset& real, const Dataset& synth, std::span<const double> weights = {}) {
  require(real.dim() == synth.dim(), "real and synthetic dimensions differ");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(real.dim(), 1.0);
  require(w.size() == real.dim(), "one weight per feature is required");
  double total = 0.0, acc = 0.0;
  for (std::size_t f = 0; f < w.size(); ++f) {
    require(w[f] >= 0.0 && std::isfinite(w[f]), "weights must be non-negative");
    total += w[f];
    if (w[f] > 0.0) acc += w[f] * ks_statistic(column(real, f), column(synth, f));
  }
  require(total > 0.0, "weights must not all be zero");
  return acc / total;
}

inline double weighted_ks(const Dataset& real, const SyntheticBatch& synth,
                          std::span<const double> weights = {}) {
  return weighted_ks(real, synth.rows, weights);
}

}  // namespace hardshap
