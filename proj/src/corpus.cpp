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
#include "relpu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "relpu/rng.hpp"

namespace relpu {
namespace {

constexpr double kBoxGrid = 4096.0;

double snap_to_grid(double v) { return std::round(v * kBoxGrid) / kBoxGrid; }

void check(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// Inverse-CDF draw from a discrete distribution given one uniform variate.
int draw_class(const std::vector<double>& prior, double u) {
  double acc = 0;
  for (std::size_t r = 0; r < prior.size(); ++r) {
    acc += prior[r];
    if (u < acc) return static_cast<int>(r) + 1;
  }
  return static_cast<int>(prior.size());
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Box flip_horizontal(const Box& b) {
  return Box{1.0 - b.x2, b.y1, 1.0 - b.x1, b.y2};
}

int Scene::relation_between(int subject, int object) const {
  for (const GtRelation& rel : relations) {
    if (rel.subject == subject && rel.object == object) return rel.predicate;
  }
  return 0;
}

void DetectionNoise::validate() const {
  check(miss_prob >= 0 && miss_prob <= 1, "detection: miss_prob outside [0,1]");
  check(box_jitter_sigma >= 0, "detection: box_jitter_sigma negative");
  check(label_error_prob >= 0 && label_error_prob <= 1,
        "detection: label_error_prob outside [0,1]");
}

void GenConfig::validate() const {
  check(num_classes >= 2, "gen: num_classes must be >= 2");
  check(feature_dim >= 1, "gen: feature_dim must be >= 1");
  check(static_cast<int>(class_prior.size()) == num_classes,
        "gen: class_prior length != num_classes");
  double prior_sum = 0;
  for (double p : class_prior) {
    check(p >= 0, "gen: class_prior entry negative");
    prior_sum += p;
  }
  check(std::abs(prior_sum - 1.0) <= 1e-9, "gen: class_prior does not sum to 1");
  check(static_cast<int>(label_frequencies.size()) == num_classes,
        "gen: label_frequencies length != num_classes");
  for (double c : label_frequencies)
    check(c > 0 && c <= 1, "gen: label frequency outside (0,1]");
  check(background_fraction >= 0 && background_fraction < 1,
        "gen: background_fraction outside [0,1)");
  check(static_cast<int>(region_centers.size()) == num_classes,
        "gen: region_centers count != num_classes");
  check(static_cast<int>(background_center.size()) == feature_dim,
        "gen: background_center dimension mismatch");
  check(region_sigma > 0, "gen: region_sigma must be positive");
  check(num_images >= 1, "gen: num_images must be >= 1");
  check(pairs_per_image >= 2, "gen: pairs_per_image must be >= 2");
  check(num_object_classes >= 1, "gen: num_object_classes must be >= 1");
  detection.validate();

  std::vector<const std::vector<double>*> centers;
  for (const auto& c : region_centers) {
    check(static_cast<int>(c.size()) == feature_dim,
          "gen: region center dimension mismatch");
    centers.push_back(&c);
  }
  centers.push_back(&background_center);
  const double min_sep = 6.0 * region_sigma;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      const double d2 = squared_distance(*centers[i], *centers[j]);
      check(d2 >= min_sep * min_sep,
            "gen: overlapping regions (center distance below 6 sigma)");
    }
  }
}

int GenConfig::objects_per_image() const {
  int n = 2;
  while (n * (n - 1) < pairs_per_image) ++n;
  return n;
}

int GenConfig::actual_pairs_per_image() const {
  const int n = objects_per_image();
  return n * (n - 1);
}

std::vector<double> geometric_prior(int num_classes, double ratio) {
  check(num_classes >= 1 && ratio > 0, "geometric_prior: bad arguments");
  std::vector<double> prior(num_classes);
  double w = 1.0, total = 0.0;
  for (int r = 0; r < num_classes; ++r, w *= ratio) {
    prior[r] = w;
    total += w;
  }
  for (double& p : prior) p /= total;
  return prior;
}

std::vector<double> linear_frequencies(int num_classes, double head, double tail) {
  check(num_classes >= 1, "linear_frequencies: bad num_classes");
  std::vector<double> c(num_classes);
  for (int r = 0; r < num_classes; ++r) {
    const double t = num_classes == 1 ? 0.0 : static_cast<double>(r) / (num_classes - 1);
    c[r] = head + (tail - head) * t;
  }
  return c;
}

void assign_grid_centers(GenConfig& cfg, double spacing_sigmas) {
  check(cfg.num_classes >= 1 && cfg.feature_dim >= 1 && cfg.region_sigma > 0,
        "assign_grid_centers: invalid config");
  const int points_needed = cfg.num_classes + 1;
  int per_axis = 2;
  while (std::pow(per_axis, cfg.feature_dim) < points_needed) ++per_axis;
  const double spacing = spacing_sigmas * cfg.region_sigma;

  cfg.region_centers.clear();
  for (int p = 0; p < points_needed; ++p) {
    std::vector<double> center(cfg.feature_dim, 0.0);
    int digits = p;
    for (int j = 0; j < cfg.feature_dim; ++j) {
      center[j] = spacing * (digits % per_axis);
      digits /= per_axis;
    }
    if (p < cfg.num_classes) {
      cfg.region_centers.push_back(std::move(center));
    } else {
      cfg.background_center = std::move(center);
    }
  }
}

int Corpus::example_index(int image_id, PairKey pair) const {
  const int n = config.objects_per_image();
  if (image_id < 0 || image_id >= static_cast<int>(scenes.size()))
    throw std::out_of_range("corpus: image_id out of range");
  if (pair.subject < 0 || pair.subject >= n || pair.object < 0 ||
      pair.object >= n || pair.subject == pair.object)
    throw std::out_of_range("corpus: bad pair key");
  // Pairs are laid out (i, j) lexicographically with j != i.
  const int within = pair.subject * (n - 1) + pair.object -
                     (pair.object > pair.subject ? 1 : 0);
  return image_id * n * (n - 1) + within;
}

const RelationExample& Corpus::example_at(int image_id, PairKey pair) const {
  return examples[static_cast<std::size_t>(example_index(image_id, pair))];
}

std::vector<std::int64_t> Corpus::labeled_counts() const {
  std::vector<std::int64_t> counts(config.num_classes, 0);
  for (const RelationExample& e : examples)
    if (e.observed_label > 0) ++counts[e.observed_label - 1];
  return counts;
}

std::vector<std::int64_t> Corpus::positive_counts() const {
  std::vector<std::int64_t> counts(config.num_classes, 0);
  for (const RelationExample& e : examples)
    if (e.true_class > 0) ++counts[e.true_class - 1];
  return counts;
}

Corpus generate_corpus(const GenConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  corpus.config = cfg;
  corpus.c_true = cfg.label_frequencies;

  const int n_objects = cfg.objects_per_image();
  corpus.scenes.reserve(cfg.num_images);
  corpus.examples.reserve(static_cast<std::size_t>(cfg.num_images) *
                          cfg.actual_pairs_per_image());

  for (int img = 0; img < cfg.num_images; ++img) {
    auto gen = rng::stream(cfg.rng_seed, "scene", static_cast<std::uint64_t>(img));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Scene scene;
    scene.image_id = img;
    scene.objects.resize(n_objects);
    for (SceneObject& obj : scene.objects) {
      const double cx = 0.15 + 0.70 * unit(gen);
      const double cy = 0.15 + 0.70 * unit(gen);
      const double w = 0.08 + 0.22 * unit(gen);
      const double h = 0.08 + 0.22 * unit(gen);
      obj.box.x1 = snap_to_grid(std::max(0.01, cx - w / 2));
      obj.box.x2 = snap_to_grid(std::min(0.99, cx + w / 2));
      obj.box.y1 = snap_to_grid(std::max(0.01, cy - h / 2));
      obj.box.y2 = snap_to_grid(std::min(0.99, cy + h / 2));
      obj.object_class = static_cast<int>(unit(gen) * cfg.num_object_classes);
      obj.object_class = std::min(obj.object_class, cfg.num_object_classes - 1);
    }

    for (int i = 0; i < n_objects; ++i) {
      for (int j = 0; j < n_objects; ++j) {
        if (i == j) continue;
        RelationExample ex;
        ex.image_id = img;
        ex.pair = PairKey{i, j};
        const double u = unit(gen);
        ex.true_class = u < cfg.background_fraction
                            ? 0
                            : draw_class(cfg.class_prior,
                                         (u - cfg.background_fraction) /
                                             (1.0 - cfg.background_fraction));
        const std::vector<double>& center =
            ex.true_class == 0 ? cfg.background_center
                               : cfg.region_centers[ex.true_class - 1];
        ex.features.resize(cfg.feature_dim);
        for (int k = 0; k < cfg.feature_dim; ++k)
          ex.features[k] = center[k] + cfg.region_sigma * gauss(gen);
        if (ex.true_class != 0)
          scene.relations.push_back(GtRelation{i, j, ex.true_class});
        corpus.examples.push_back(std::move(ex));
      }
    }
    corpus.scenes.push_back(std::move(scene));
  }
  return corpus;
}

void scar_delete(std::vector<RelationExample>& examples,
                 const std::vector<double>& c_true, std::uint64_t seed) {
  for (double c : c_true)
    check(c > 0 && c <= 1, "scar_delete: label frequency outside (0,1]");
  // Per-image streams keep deletion independent of example order elsewhere.
  std::mt19937_64 gen;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int current_image = -1;
  for (RelationExample& ex : examples) {
    if (ex.image_id != current_image) {
      current_image = ex.image_id;
      gen = rng::stream(seed, "scar", static_cast<std::uint64_t>(current_image));
    }
    if (ex.true_class == 0) {
      ex.observed_label = 0;
      continue;
    }
    check(ex.true_class >= 1 &&
              ex.true_class <= static_cast<int>(c_true.size()),
          "scar_delete: true class out of range");
    ex.observed_label =
        unit(gen) < c_true[ex.true_class - 1] ? ex.true_class : 0;
  }
}

DetectionRealization simulate_detection(const Scene& scene, bool flipped,
                                        const DetectionNoise& noise,
                                        std::uint64_t seed,
                                        int num_object_classes,
                                        double iou_threshold) {
  noise.validate();
  check(num_object_classes >= 1, "simulate_detection: bad num_object_classes");
  auto gen = rng::stream(seed, "detect", flipped ? 1 : 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Box> gt_boxes(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    gt_boxes[i] = flipped ? flip_horizontal(scene.objects[i].box)
                          : scene.objects[i].box;
  }

  DetectionRealization out;
  out.image_id = scene.image_id;
  out.flipped = flipped;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (unit(gen) < noise.miss_prob) continue;
    Detection det;
    det.source_object = static_cast<int>(i);
    det.box = gt_boxes[i];
    if (noise.box_jitter_sigma > 0) {
      det.box.x1 += noise.box_jitter_sigma * gauss(gen);
      det.box.y1 += noise.box_jitter_sigma * gauss(gen);
      det.box.x2 += noise.box_jitter_sigma * gauss(gen);
      det.box.y2 += noise.box_jitter_sigma * gauss(gen);
      if (det.box.x1 > det.box.x2) std::swap(det.box.x1, det.box.x2);
      if (det.box.y1 > det.box.y2) std::swap(det.box.y1, det.box.y2);
      det.box.x1 = std::clamp(det.box.x1, 0.0, 1.0);
      det.box.x2 = std::clamp(det.box.x2, 0.0, 1.0);
      det.box.y1 = std::clamp(det.box.y1, 0.0, 1.0);
      det.box.y2 = std::clamp(det.box.y2, 0.0, 1.0);
    }
    det.predicted_class = scene.objects[i].object_class;
    if (unit(gen) < noise.label_error_prob) {
      det.predicted_class = static_cast<int>(unit(gen) * num_object_classes);
      det.predicted_class = std::min(det.predicted_class, num_object_classes - 1);
    }
    out.detections.push_back(det);
  }

  // Each detection is independently assigned its best-IoU ground-truth
  // object; a GT object may take several detections. The assignment counts
  // as a match only when the predicted class agrees.
  out.box_assignment.resize(out.detections.size());
  out.matching.resize(out.detections.size());
  for (std::size_t d = 0; d < out.detections.size(); ++d) {
    double best = iou_threshold;
    std::optional<int> best_gt;
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      const double overlap = iou(out.detections[d].box, gt_boxes[g]);
      if (overlap > best || (overlap == best && !best_gt)) {
        best = overlap;
        best_gt = static_cast<int>(g);
      }
    }
    out.box_assignment[d] = best_gt;
    if (best_gt && scene.objects[*best_gt].object_class ==
                       out.detections[d].predicted_class) {
      out.matching[d] = best_gt;
    }
  }
  return out;
}

std::vector<ValidPair> valid_pairs(const DetectionRealization& realization,
                                   const Scene& scene) {
  std::vector<ValidPair> pairs;
  const int n = static_cast<int>(realization.detections.size());
  for (int p = 0; p < n; ++p) {
    if (!realization.matching[p]) continue;
    for (int q = 0; q < n; ++q) {
      if (q == p || !realization.matching[q]) continue;
      const int gs = *realization.matching[p];
      const int go = *realization.matching[q];
      if (gs == go) continue;  // degenerate: both endpoints on one GT object
      pairs.push_back(ValidPair{PairKey{p, q}, scene.relation_between(gs, go)});
    }
  }
  return pairs;
}

}  // namespace relpu
