/*
 * Copyright 2026 The relpu Authors.
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
#include "relpu/recovery.hpp"

#include <algorithm>
#include <stdexcept>

namespace relpu {

RecoveredScores recover(const ProbabilityVector& biased,
                        const LabelFrequencies& frequencies,
                        bool renormalize) {
  frequencies.validate();
  const int k = frequencies.num_classes();
  if (biased.num_classes() != k)
    throw std::invalid_argument("recover: class count mismatch");
  RecoveredScores out;
  out.scores.resize(k);
  double total = 0;
  for (int r = 1; r <= k; ++r) {
    out.scores[r - 1] = biased[r] / frequencies.for_class(r);
    total += out.scores[r - 1];
  }
  if (renormalize && total > 0)
    for (double& s : out.scores) s /= total;
  return out;
}

RecoveredScores foreground_scores(const ProbabilityVector& biased) {
  RecoveredScores out;
  out.scores.assign(biased.probs.begin() + 1, biased.probs.end());
  return out;
}

std::vector<ScoredPrediction> rank_predictions(
    int image_id,
    const std::vector<std::pair<PairKey, RecoveredScores>>& pair_scores,
    bool graph_constraint, int top_k) {
  if (top_k < 1) throw std::invalid_argument("rank_predictions: top_k must be >= 1");
  std::vector<ScoredPrediction> candidates;
  for (const auto& [pair, recovered] : pair_scores) {
    const int k = static_cast<int>(recovered.scores.size());
    if (graph_constraint) {
      int best = 1;
      for (int r = 2; r <= k; ++r)
        if (recovered.for_class(r) > recovered.for_class(best)) best = r;
      candidates.push_back(
          ScoredPrediction{image_id, pair, best, recovered.for_class(best)});
    } else {
      for (int r = 1; r <= k; ++r)
        candidates.push_back(
            ScoredPrediction{image_id, pair, r, recovered.for_class(r)});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ScoredPrediction& a, const ScoredPrediction& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.pair != b.pair) return a.pair < b.pair;
                     return a.predicate < b.predicate;
                   });
  if (static_cast<int>(candidates.size()) > top_k) candidates.resize(top_k);
  return candidates;
}

}  // namespace relpu
