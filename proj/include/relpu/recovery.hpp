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
#pragma once

#include <utility>
#include <vector>

#include "relpu/classifier.hpp"
#include "relpu/freq_est.hpp"

namespace relpu {

// Foreground scores after dividing the biased probabilities element-wise by
// the label frequencies. The background entry is not recovered: c has length
// K and background is never emitted as a prediction. Scores may exceed 1;
// they rank predictions and are not re-normalized unless asked.
struct RecoveredScores {
  std::vector<double> scores;  // class r at scores[r-1]

  double for_class(int r) const { return scores[static_cast<std::size_t>(r) - 1]; }
};

RecoveredScores recover(const ProbabilityVector& biased,
                        const LabelFrequencies& frequencies,
                        bool renormalize = false);

// Foreground probabilities passed through unchanged; the biased baseline's
// ranking scores.
RecoveredScores foreground_scores(const ProbabilityVector& biased);

struct ScoredPrediction {
  int image_id = 0;
  PairKey pair;
  int predicate = 0;  // 1..K
  double score = 0;
};

// Ranks one image's candidates. With graph_constraint only each pair's
// argmax class survives; without it every (pair, class) candidate competes.
// Sorted by score descending, ties broken by (pair, class) ascending, then
// truncated to top_k.
std::vector<ScoredPrediction> rank_predictions(
    int image_id,
    const std::vector<std::pair<PairKey, RecoveredScores>>& pair_scores,
    bool graph_constraint, int top_k);

}  // namespace relpu
