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

#include <string>
#include <string_view>
#include <vector>

#include "relpu/corpus.hpp"
#include "relpu/metrics.hpp"
#include "relpu/training.hpp"

namespace relpu {

// The three task analogues. predcls: GT pairs and labels given. sgcls: GT
// boxes, noisy object labels. sgdet: full detection simulation.
enum class Setting { predcls, sgcls, sgdet };

std::string_view to_string(Setting setting);
Setting setting_from_string(std::string_view name);

// Training stream for one setting over a slice of corpus images.
//
// predcls passes the corpus pairs through unchanged. sgcls/sgdet realize a
// fresh detection pass per (epoch, image): epochs >= 0 flip each image with
// probability 0.5 and draw fresh noise (this is what recovers valid
// examples across epochs), the canonical epoch uses one fixed unflipped
// pass. Detection pairs carry their source GT pair's features; their label
// is the matched GT pair's observed label, 0 when invalid.
class SettingSource final : public ExampleSource {
 public:
  SettingSource(const Corpus* corpus, Setting setting,
                std::vector<int> image_ids, std::uint64_t seed);

  int num_images() const override { return static_cast<int>(image_ids_.size()); }
  int num_classes() const override { return corpus_->config.num_classes; }
  int feature_dim() const override { return corpus_->config.feature_dim; }
  void image_examples(int epoch, int image_index,
                      std::vector<TrainExample>& out) const override;

  Setting setting() const { return setting_; }
  DetectionNoise effective_noise() const;
  DetectionRealization realize(int epoch, int image_index) const;

  // Valid labeled examples per class of one pass, the input counts of both
  // estimators.
  std::vector<std::int64_t> valid_labeled_counts(int epoch) const;

 private:
  const Corpus* corpus_;
  Setting setting_;
  std::vector<int> image_ids_;
  std::uint64_t seed_;
};

// One image's evaluation candidates: every ordered detection pair, plus the
// detection->GT mapping used by the metrics. In predcls the candidates are
// the GT pairs themselves and the mapping is the identity.
struct EvalImage {
  int image_id = 0;
  std::vector<TrainExample> candidates;
  DetToGt det_to_gt;
  bool identity_mapping = true;
};

EvalImage eval_image(const Corpus& corpus, Setting setting, int image_id,
                     std::uint64_t seed);

}  // namespace relpu
