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

// Data-IQ characterizer: confidence (mean correct-label probability over
// training checkpoints) and aleatoric uncertainty (mean p(1-p)).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hardshap/common.hpp"
#include "hardshap/dataset.hpp"
#include "hardshap/valuation.hpp"

namespace hardshap {

// Row-major n x E matrix; entry (i, e) is the probability checkpoint e
// assigns to the correct label of row i.
struct CheckpointProbs {
  std::size_t rows = 0;
  std::size_t checkpoints = 0;
  std::vector<double> probs;
  std::vector<RowId> ids;

  double at(std::size_t i, std::size_t e) const { return probs[i * checkpoints + e]; }

  void validate() const {
    require(checkpoints >= 1, "need at least one checkpoint");
    require(probs.size() == rows * checkpoints, "checkpoint matrix shape mismatch");
    require(ids.size() == rows, "checkpoint ids do not match row count");
    for (double p : probs) require(p >= 0.0 && p <= 1.0, "checkpoint probability outside [0,1]");
  }
};

inline std::vector<double> confidence(const CheckpointProbs& cp) {
  cp.validate();
  std::vector<double> out(cp.rows, 0.0);
  for (std::size_t i = 0; i < cp.rows; ++i) {
    double acc = 0.0;
    for (std::size_t e = 0; e < cp.checkpoints; ++e) acc += cp.at(i, e);
    out[i] = acc / static_cast<double>(cp.checkpoints);
  }
  return out;
}

inline std::vector<double> aleatoric(const CheckpointProbs& cp) {
  cp.validate();
  std::vector<double> out(cp.rows, 0.0);
  for (std::size_t i = 0; i < cp.rows; ++i) {
    double acc = 0.0;
    for (std::size_t e = 0; e < cp.checkpoints; ++e) acc += cp.at(i, e) * (1.0 - cp.at(i, e));
    out[i] = acc / static_cast<double>(cp.checkpoints);
  }
  return out;
}

enum class Tag { kEasy, kHard, kAmbiguous };

inline std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::kEasy: return "Easy";
    case Tag::kHard: return "Hard";
    case Tag::kAmbiguous: return "Ambiguous";
  }
  return "Ambiguous";
}

struct TagThresholds {
  double low_confidence = 0.25;
  double high_confidence = 0.75;
  double low_aleatoric = 0.2;
};

struct DataIQTags {
  std::vector<double> confidence;
  std::vector<double> aleatoric;
  std::vector<Tag> tags;
  TagThresholds thresholds;
};

inline Tag tag_point(double conf, double aleo, const TagThresholds& t) {
  if (aleo <= t.low_aleatoric) {
    if (conf >= t.high_confidence) return Tag::kEasy;
    if (conf <= t.low_confidence) return Tag::kHard;
  }
  return Tag::kAmbiguous;
}

inline DataIQTags tag(std::vector<double> conf, std::vector<double> aleo,
                      const TagThresholds& thresholds = {}) {
  require(conf.size() == aleo.size(), "confidence and aleatoric lengths differ");
  require(thresholds.low_confidence < thresholds.high_confidence,
          "low confidence threshold must be below the high threshold");
  DataIQTags out{std::move(conf), std::move(aleo), {}, thresholds};
  out.tags.reserve(out.confidence.size());
  for (std::size_t i = 0; i < out.confidence.size(); ++i)
    out.tags.push_back(tag_point(out.confidence[i], out.aleatoric[i], thresholds));
  return out;
}

// Checkpoint e is a KNN probability model fitted on a bootstrap resample
// (drawn with seed derive_seed(seed, e)). A row's probability is the share of
// its K nearest in-bag slots, with its own copies excluded, that carry its
// label. Duplicated draws occupy one slot each.
inline CheckpointProbs bagged_checkpoint_probs(const Dataset& train, std::size_t checkpoints,
                                               std::size_t K, std::uint64_t seed) {
  require(checkpoints >= 2, "need at least two checkpoints");
  require(K >= 1, "K must be positive");
  require(train.has_both_classes(), "both classes must be present");
  const std::size_t n = train.size();

  CheckpointProbs cp{n, checkpoints, std::vector<double>(n * checkpoints, 0.0), train.ids()};
  parallel_for(checkpoints, [&](std::size_t e) {
    Rng rng(derive_seed(seed, e));
    std::vector<std::uint32_t> draws(n, 0);
    for (std::size_t k = 0; k < n; ++k) ++draws[rng.below(n)];
    std::vector<std::size_t> bag;
    for (std::size_t i = 0; i < n; ++i)
      if (draws[i] > 0) bag.push_back(i);

    std::vector<detail::Neighbor> near;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pool = n - draws[i];
      if (pool < K)
        throw InvalidInput("K=" + std::to_string(K) + " exceeds the in-bag neighbor pool of row " +
                           std::to_string(train.id(i)));
      near.clear();
      for (auto b : bag)
        if (b != i)
          near.push_back({squared_distance(train.row(b), train.row(i)), train.id(b),
                          static_cast<std::uint32_t>(b)});
      // At most K distinct rows can be needed.
      const std::size_t head = std::min(K, near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<long>(head), near.end(),
                        detail::neighbor_less);
      std::size_t slots = 0, hits = 0;
      for (std::size_t k = 0; k < head && slots < K; ++k) {
        const std::size_t take = std::min<std::size_t>(draws[near[k].index], K - slots);
        slots += take;
        if (train.label(near[k].index) == train.label(i)) hits += take;
      }
      cp.probs[i * checkpoints + e] = static_cast<double>(hits) / static_cast<double>(K);
    }
  });
  return cp;
}

// Adapter for benchmarks: lower confidence = harder.
inline ValuationScores dataiq_scores(const Dataset& train, std::size_t checkpoints, std::size_t K,
                                     std::uint64_t seed) {
  ValuationScores out{confidence(bagged_checkpoint_probs(train, checkpoints, K, seed)), train.ids(),
                      Method::kDataIqConfidence, {}};
  out.params["checkpoints"] = std::to_string(checkpoints);
  out.params["K"] = std::to_string(K);
  out.params["seed"] = std::to_string(seed);
  return out;
}

}  // namespace hardshap
