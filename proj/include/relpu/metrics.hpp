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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relpu/corpus.hpp"
#include "relpu/recovery.hpp"

namespace relpu {

struct GtTriple {
  int subject = 0;  // GT object index
  int object = 0;
  int predicate = 0;
  auto operator<=>(const GtTriple&) const = default;
};

struct GroundTruthSet {
  int num_classes = 0;
  std::vector<std::vector<GtTriple>> triples_by_image;
  std::vector<std::int64_t> class_counts;  // GT triples per class, corpus-wide

  static GroundTruthSet from_scenes(std::span<const Scene> scenes, int num_classes);
  std::int64_t total_triples() const;
};

// Per-detection matched GT object; predictions over unmatched detections
// cannot hit. nullptr mapping means pair indices already are GT indices.
using DetToGt = std::vector<std::optional<int>>;

struct ImageEval {
  std::vector<ScoredPrediction> ranked;  // rank order, truncated to max K
  const std::vector<GtTriple>* gt = nullptr;
  const DetToGt* mapping = nullptr;
};

// Greedy matching in rank order: a prediction maps onto a GT triple (after
// the detection->GT translation when a mapping is given) and consumes it;
// each GT triple can be hit once, duplicates rank as non-hits. Returns one
// hit flag per ranked prediction.
std::vector<std::uint8_t> match_predictions(const ImageEval& image);

// Fraction of GT triples hit within the top-k, averaged over images with at
// least one GT triple. Empty when no image has ground truth.
std::optional<double> recall_at_k(std::span<const ImageEval> images,
                                  std::span<const std::vector<std::uint8_t>> hits,
                                  int k);

struct PerClassRecall {
  std::vector<double> recall;          // class r at [r-1]; 0 when absent
  std::vector<std::uint8_t> present;   // class has >= 1 GT triple
  double mean_recall = 0;              // unweighted mean over present classes
};

// Per-class recall over all GT triples of the class corpus-wide, then the
// unweighted mean over classes present in GT.
PerClassRecall mean_recall_at_k(std::span<const ImageEval> images,
                                std::span<const std::vector<std::uint8_t>> hits,
                                int num_classes, int k);

struct Buckets {
  int head = 15;
  int middle = 20;
  int tail = 15;
};

// Unweighted mean of per-class recalls within each frequency-ordered bucket
// (classes absent from GT excluded). When the absolute sizes do not sum to
// the class count, falls back to fractions (0.3, 0.4, 0.3) with half-up
// rounding for head and tail.
struct BucketRecalls {
  std::array<double, 3> recall{};            // head, middle, tail
  std::array<int, 3> class_counts{};         // present classes per bucket
  std::array<std::int64_t, 3> gt_counts{};   // GT triples per bucket
};
BucketRecalls bucket_recalls(const PerClassRecall& per_class,
                             std::span<const std::int64_t> class_gt_counts,
                             std::span<const int> frequency_order,
                             Buckets buckets);

struct RecallSnapshot {
  std::optional<double> recall;
  PerClassRecall per_class;
  BucketRecalls buckets;
};

// All recall metrics at one k from hit flags computed on the full ranked
// lists (prefix truncation equals re-running the greedy match on the top-k).
RecallSnapshot recall_snapshot(std::span<const ImageEval> images,
                               std::span<const std::vector<std::uint8_t>> hits,
                               const GroundTruthSet& gt, int k,
                               std::span<const int> frequency_order,
                               Buckets buckets);

// Recall suite for one prediction source: snapshots per configured K for the
// graph-constraint and non-graph-constraint regimes (empty when disabled).
struct MetricsReport {
  std::vector<int> ks;
  std::vector<RecallSnapshot> constraint;
  std::vector<RecallSnapshot> ng;
};

}  // namespace relpu
