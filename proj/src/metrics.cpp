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
#include "relpu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace relpu {

GroundTruthSet GroundTruthSet::from_scenes(std::span<const Scene> scenes,
                                           int num_classes) {
  GroundTruthSet gt;
  gt.num_classes = num_classes;
  gt.class_counts.assign(num_classes, 0);
  gt.triples_by_image.reserve(scenes.size());
  for (const Scene& scene : scenes) {
    std::vector<GtTriple> triples;
    for (const GtRelation& rel : scene.relations) {
      triples.push_back(GtTriple{rel.subject, rel.object, rel.predicate});
      ++gt.class_counts[rel.predicate - 1];
    }
    gt.triples_by_image.push_back(std::move(triples));
  }
  return gt;
}

std::int64_t GroundTruthSet::total_triples() const {
  std::int64_t total = 0;
  for (std::int64_t c : class_counts) total += c;
  return total;
}

std::vector<std::uint8_t> match_predictions(const ImageEval& image) {
  std::map<GtTriple, bool> consumed;  // triple -> already hit
  for (const GtTriple& t : *image.gt) consumed.emplace(t, false);

  std::vector<std::uint8_t> hits(image.ranked.size(), 0);
  for (std::size_t i = 0; i < image.ranked.size(); ++i) {
    const ScoredPrediction& pred = image.ranked[i];
    int subject = pred.pair.subject;
    int object = pred.pair.object;
    if (image.mapping != nullptr) {
      const DetToGt& mapping = *image.mapping;
      const auto& ms = mapping.at(subject);
      const auto& mo = mapping.at(object);
      if (!ms || !mo) continue;
      subject = *ms;
      object = *mo;
    }
    const auto it = consumed.find(GtTriple{subject, object, pred.predicate});
    if (it == consumed.end() || it->second) continue;
    it->second = true;
    hits[i] = 1;
  }
  return hits;
}

std::optional<double> recall_at_k(std::span<const ImageEval> images,
                                  std::span<const std::vector<std::uint8_t>> hits,
                                  int k) {
  double total = 0;
  int counted_images = 0;
  for (std::size_t img = 0; img < images.size(); ++img) {
    const std::size_t gt_n = images[img].gt->size();
    if (gt_n == 0) continue;  // recall undefined for this image
    std::int64_t hit = 0;
    const auto& flags = hits[img];
    const std::size_t limit = std::min<std::size_t>(flags.size(), k);
    for (std::size_t i = 0; i < limit; ++i) hit += flags[i];
    total += static_cast<double>(hit) / static_cast<double>(gt_n);
    ++counted_images;
  }
  if (counted_images == 0) return std::nullopt;
  return total / counted_images;
}

PerClassRecall mean_recall_at_k(std::span<const ImageEval> images,
                                std::span<const std::vector<std::uint8_t>> hits,
                                int num_classes, int k) {
  std::vector<std::int64_t> class_hits(num_classes, 0);
  std::vector<std::int64_t> class_gt(num_classes, 0);
  for (std::size_t img = 0; img < images.size(); ++img) {
    for (const GtTriple& t : *images[img].gt) ++class_gt[t.predicate - 1];
    const auto& flags = hits[img];
    const std::size_t limit = std::min<std::size_t>(flags.size(), k);
    for (std::size_t i = 0; i < limit; ++i)
      if (flags[i]) ++class_hits[images[img].ranked[i].predicate - 1];
  }

  PerClassRecall out;
  out.recall.assign(num_classes, 0.0);
  out.present.assign(num_classes, 0);
  double sum = 0;
  int present = 0;
  for (int r = 0; r < num_classes; ++r) {
    if (class_gt[r] == 0) continue;
    out.present[r] = 1;
    out.recall[r] = static_cast<double>(class_hits[r]) / class_gt[r];
    sum += out.recall[r];
    ++present;
  }
  out.mean_recall = present > 0 ? sum / present : 0.0;
  return out;
}

BucketRecalls bucket_recalls(const PerClassRecall& per_class,
                             std::span<const std::int64_t> class_gt_counts,
                             std::span<const int> frequency_order,
                             Buckets buckets) {
  const int k = static_cast<int>(per_class.recall.size());
  if (static_cast<int>(frequency_order.size()) != k)
    throw std::invalid_argument("bucket_recalls: frequency order size mismatch");
  int head = buckets.head, middle = buckets.middle, tail = buckets.tail;
  if (head + middle + tail != k) {
    // Deterministic fallback: head/tail round half-up, middle absorbs the rest.
    head = static_cast<int>(std::floor(0.3 * k + 0.5));
    tail = static_cast<int>(std::floor(0.3 * k + 0.5));
    middle = k - head - tail;
    if (middle < 0) throw std::invalid_argument("bucket_recalls: bad bucket sizes");
  }

  BucketRecalls out;
  std::array<double, 3> sums{};
  const std::array<int, 3> sizes{head, middle, tail};
  int pos = 0;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < sizes[b]; ++i, ++pos) {
      const int cls = frequency_order[pos];
      out.gt_counts[b] += class_gt_counts[cls - 1];
      if (!per_class.present[cls - 1]) continue;
      sums[b] += per_class.recall[cls - 1];
      ++out.class_counts[b];
    }
    out.recall[b] = out.class_counts[b] > 0 ? sums[b] / out.class_counts[b] : 0.0;
  }
  return out;
}

RecallSnapshot recall_snapshot(std::span<const ImageEval> images,
                               std::span<const std::vector<std::uint8_t>> hits,
                               const GroundTruthSet& gt, int k,
                               std::span<const int> frequency_order,
                               Buckets buckets) {
  RecallSnapshot snap;
  snap.recall = recall_at_k(images, hits, k);
  snap.per_class = mean_recall_at_k(images, hits, gt.num_classes, k);
  snap.buckets = bucket_recalls(snap.per_class, gt.class_counts, frequency_order, buckets);
  return snap;
}

}  // namespace relpu
