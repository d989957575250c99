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

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

namespace relpu {

// Boxes are normalized (x1, y1, x2, y2) with x1 < x2, y1 < y2. Generated
// coordinates are quantized to a 1/4096 grid so that horizontal flipping
// (x -> 1 - x) is an exact involution.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

double iou(const Box& a, const Box& b);
Box flip_horizontal(const Box& b);

struct SceneObject {
  Box box;
  int object_class = 0;
};

struct GtRelation {
  int subject = 0;  // object index within the scene
  int object = 0;
  int predicate = 0;  // 1..K
};

struct Scene {
  int image_id = 0;
  std::vector<SceneObject> objects;
  std::vector<GtRelation> relations;

  // Predicate of the ordered pair (subject, object), 0 if unrelated.
  int relation_between(int subject, int object) const;
};

// Ordered subject/object pair, indices into either scene objects or
// detections depending on context.
struct PairKey {
  int subject = 0;
  int object = 0;
  auto operator<=>(const PairKey&) const = default;
};

// One subject-object pair: features, observed label s (0 = unlabeled) and
// latent true class y (0 = background; hidden from training, available to
// evaluation and oracles).
struct RelationExample {
  int image_id = 0;
  PairKey pair;
  std::vector<double> features;
  int observed_label = 0;
  int true_class = 0;
};

struct DetectionNoise {
  double miss_prob = 0.0;         // per-object drop probability
  double box_jitter_sigma = 0.0;  // additive coordinate noise
  double label_error_prob = 0.0;  // probability the predicted class is resampled

  void validate() const;
};

struct GenConfig {
  int num_classes = 2;   // K predicate classes; background is implicit class 0
  int feature_dim = 2;
  std::vector<double> class_prior;                  // length K, sums to 1
  std::vector<std::vector<double>> region_centers;  // K class centers
  std::vector<double> background_center;
  double region_sigma = 0.05;
  std::vector<double> label_frequencies;  // c_true, entries in (0, 1]
  double background_fraction = 0.5;       // share of pairs with y = 0
  int num_images = 100;
  int pairs_per_image = 20;
  int num_object_classes = 10;
  DetectionNoise detection;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws std::invalid_argument

  // Smallest N with N*(N-1) >= pairs_per_image; all N*(N-1) ordered pairs
  // of a scene become examples.
  int objects_per_image() const;
  int actual_pairs_per_image() const;
};

// Normalized geometric decay prior: pi_r proportional to ratio^(r-1).
std::vector<double> geometric_prior(int num_classes, double ratio);

// Label frequencies linear from head to tail in class index order.
std::vector<double> linear_frequencies(int num_classes, double head, double tail);

// Places K class centers plus the background center on a deterministic grid
// with pairwise spacing >= spacing_sigmas * region_sigma.
void assign_grid_centers(GenConfig& cfg, double spacing_sigmas = 10.0);

struct Corpus {
  GenConfig config;
  std::vector<Scene> scenes;                // image_id == index
  std::vector<RelationExample> examples;    // image-major, pair-lexicographic
  std::vector<double> c_true;

  int example_index(int image_id, PairKey pair) const;
  const RelationExample& example_at(int image_id, PairKey pair) const;
  std::vector<std::int64_t> labeled_counts() const;  // per class, by s
  std::vector<std::int64_t> positive_counts() const; // per class, by y
};

// Generates scenes and relation examples with y filled (s left 0).
Corpus generate_corpus(const GenConfig& cfg);

// SCAR label deletion: for y=r, s=r with probability c_true[r-1], else 0.
void scar_delete(std::vector<RelationExample>& examples,
                 const std::vector<double>& c_true, std::uint64_t seed);

struct Detection {
  Box box;
  int predicted_class = 0;
  int source_object = 0;  // GT object this detection originated from
};

struct DetectionRealization {
  int image_id = 0;
  bool flipped = false;
  std::vector<Detection> detections;
  // Per detection: best-IoU GT object at IoU >= threshold, ignoring labels.
  // This is the training assignment.
  std::vector<std::optional<int>> box_assignment;
  // Per detection: the box assignment when the predicted class also agrees
  // with that GT object, otherwise empty. Only these endpoints count as
  // matched for valid pairs and evaluation. Several detections may match
  // the same GT object.
  std::vector<std::optional<int>> matching;
};

// One noisy detector pass over a scene. flipped=true mirrors all boxes about
// the vertical axis before jitter; matching is computed against the
// identically flipped ground truth. A different seed or flip state yields an
// independent noise draw.
DetectionRealization simulate_detection(const Scene& scene, bool flipped,
                                        const DetectionNoise& noise,
                                        std::uint64_t seed,
                                        int num_object_classes,
                                        double iou_threshold = 0.5);

struct ValidPair {
  PairKey detection_pair;
  int true_class = 0;  // predicate of the matched GT pair, 0 if unrelated
};

// Ordered detection pairs whose endpoints are both matched, to distinct GT
// objects. A GT pair may be carried by multiple detection pairs.
std::vector<ValidPair> valid_pairs(const DetectionRealization& realization,
                                   const Scene& scene);

}  // namespace relpu
