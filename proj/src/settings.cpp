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
#include "relpu/settings.hpp"

#include <stdexcept>

#include "relpu/rng.hpp"

namespace relpu {
namespace {

// Detection pairs of a realization as training examples. The training label
// follows the IoU box assignment (the usual proposal labeling); validity for
// frequency estimation additionally needs the predicted object labels right.
// Features come from the source GT pair.
void realization_examples(const Corpus& corpus, int image_id,
                          const DetectionRealization& realization,
                          std::vector<TrainExample>& out) {
  const int n = static_cast<int>(realization.detections.size());
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      const Detection& dp = realization.detections[p];
      const Detection& dq = realization.detections[q];
      const RelationExample& origin = corpus.example_at(
          image_id, PairKey{dp.source_object, dq.source_object});
      TrainExample ex;
      ex.image_index = image_id;
      ex.pair = PairKey{p, q};
      ex.features = &origin.features;
      const auto& as = realization.box_assignment[p];
      const auto& ao = realization.box_assignment[q];
      if (as && ao && *as != *ao) {
        ex.label = corpus.example_at(image_id, PairKey{*as, *ao}).observed_label;
        ex.valid = realization.matching[p].has_value() &&
                   realization.matching[q].has_value();
      }
      out.push_back(ex);
    }
  }
}

}  // namespace

std::string_view to_string(Setting setting) {
  switch (setting) {
    case Setting::predcls: return "predcls";
    case Setting::sgcls: return "sgcls";
    case Setting::sgdet: return "sgdet";
  }
  return "?";
}

Setting setting_from_string(std::string_view name) {
  if (name == "predcls") return Setting::predcls;
  if (name == "sgcls") return Setting::sgcls;
  if (name == "sgdet") return Setting::sgdet;
  throw std::invalid_argument("unknown setting: " + std::string(name));
}

SettingSource::SettingSource(const Corpus* corpus, Setting setting,
                             std::vector<int> image_ids, std::uint64_t seed)
    : corpus_(corpus), setting_(setting), image_ids_(std::move(image_ids)), seed_(seed) {}

DetectionNoise SettingSource::effective_noise() const {
  DetectionNoise noise;  // predcls: none
  if (setting_ == Setting::sgcls) {
    noise.label_error_prob = corpus_->config.detection.label_error_prob;
  } else if (setting_ == Setting::sgdet) {
    noise = corpus_->config.detection;
  }
  return noise;
}

DetectionRealization SettingSource::realize(int epoch, int image_index) const {
  const int image_id = image_ids_.at(image_index);
  const Scene& scene = corpus_->scenes[image_id];
  bool flip = false;
  if (epoch >= 0) {
    auto gen = rng::stream(seed_, "flip", static_cast<std::uint64_t>(epoch),
                           static_cast<std::uint64_t>(image_id));
    flip = std::uniform_real_distribution<double>(0.0, 1.0)(gen) < 0.5;
  }
  const std::uint64_t pass_seed =
      rng::derive(seed_, "pass", static_cast<std::uint64_t>(epoch + 16),
                  static_cast<std::uint64_t>(image_id));
  return simulate_detection(scene, flip, effective_noise(), pass_seed,
                            corpus_->config.num_object_classes);
}

void SettingSource::image_examples(int epoch, int image_index,
                                   std::vector<TrainExample>& out) const {
  out.clear();
  const int image_id = image_ids_.at(image_index);
  if (setting_ == Setting::predcls) {
    const int n = corpus_->config.objects_per_image();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const RelationExample& e = corpus_->example_at(image_id, PairKey{i, j});
        out.push_back(TrainExample{image_id, e.pair, &e.features,
                                   e.observed_label, /*valid=*/true});
      }
    }
    return;
  }
  realization_examples(*corpus_, image_id, realize(epoch, image_index), out);
}

std::vector<std::int64_t> SettingSource::valid_labeled_counts(int epoch) const {
  std::vector<std::int64_t> counts(corpus_->config.num_classes, 0);
  std::vector<TrainExample> scratch;
  for (int i = 0; i < num_images(); ++i) {
    image_examples(epoch, i, scratch);
    for (const TrainExample& e : scratch)
      if (e.valid && e.label > 0) ++counts[e.label - 1];
  }
  return counts;
}

EvalImage eval_image(const Corpus& corpus, Setting setting, int image_id,
                     std::uint64_t seed) {
  EvalImage out;
  out.image_id = image_id;
  if (setting == Setting::predcls) {
    const int n = corpus.config.objects_per_image();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const RelationExample& e = corpus.example_at(image_id, PairKey{i, j});
        out.candidates.push_back(TrainExample{image_id, e.pair, &e.features,
                                              e.observed_label, true});
      }
    }
    return out;
  }
  SettingSource source(&corpus, setting, {image_id}, seed);
  const DetectionRealization realization =
      source.realize(ExampleSource::kCanonicalEpoch, 0);
  realization_examples(corpus, image_id, realization, out.candidates);
  out.det_to_gt = realization.matching;
  out.identity_mapping = false;
  return out;
}

}  // namespace relpu
