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

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "relpu/classifier.hpp"
#include "relpu/corpus.hpp"

namespace relpu {

// One realized training example. Features are non-owning: they point into
// storage that outlives the training run (normally the corpus).
struct TrainExample {
  int image_index = 0;
  PairKey pair;
  const std::vector<double>* features = nullptr;
  int label = 0;   // observed label s; 0 = background/unlabeled
  bool valid = false;  // usable for label frequency estimation
};

// Per-setting training stream. Implementations must be pure functions of
// (epoch, image_index) so that training stays deterministic.
class ExampleSource {
 public:
  // Canonical pass: no flip augmentation, fixed noise stream. Used for
  // held-out validation and post-training estimation.
  static constexpr int kCanonicalEpoch = -1;

  virtual ~ExampleSource() = default;
  virtual int num_images() const = 0;
  virtual int num_classes() const = 0;
  virtual int feature_dim() const = 0;
  virtual void image_examples(int epoch, int image_index,
                              std::vector<TrainExample>& out) const = 0;
};

// Training stream over plain relation examples (all pairs usable, no
// augmentation; the PredCls analogue and unit-test workhorse).
class VectorSource final : public ExampleSource {
 public:
  VectorSource(const std::vector<RelationExample>* examples, int num_classes,
               int feature_dim);

  int num_images() const override;
  int num_classes() const override { return num_classes_; }
  int feature_dim() const override { return feature_dim_; }
  void image_examples(int epoch, int image_index,
                      std::vector<TrainExample>& out) const override;

 private:
  const std::vector<RelationExample>* examples_;
  int num_classes_;
  int feature_dim_;
  std::vector<std::vector<int>> by_image_;
};

struct TrainConfig {
  double lr_init = 0.01;
  int warmup_iters = 500;
  int batch_size_images = 8;
  double bg_to_fg_ratio = 3.0;
  int max_pairs_per_image = 1024;
  int max_iters = 4000;
  int plateau_patience = 2;
  int max_lr_decays = 2;
  double lr_decay_factor = 10.0;
  bool reweight = false;
  std::uint64_t rng_seed = 0;
  // Schedule plumbing not pinned by the training recipe:
  int eval_interval = 100;
  double plateau_min_delta = 1e-4;
  double holdout_fraction = 0.1;

  void validate() const;
};

// Called once per batch with the batch examples and their predicted
// probability vectors (before the SGD step). Must not mutate training state.
using BatchHook = std::function<void(const std::vector<TrainExample>&,
                                     const std::vector<ProbabilityVector>&)>;

struct TrainResult {
  ClassifierParams params;  // final checkpoint
  int iterations = 0;
  int lr_decays = 0;
  std::vector<double> epoch_mean_loss;
  double final_validation_loss = 0.0;
};

// Mini-batch SGD on the cross-entropy of observed labels, treating
// unlabeled pairs as background. Per image, all labeled pairs are kept and
// background pairs are sampled at bg_to_fg_ratio up to max_pairs_per_image.
// Learning rate warms up linearly, then decays by lr_decay_factor (at most
// max_lr_decays times) when the held-out loss plateaus plateau_patience
// evaluations in a row; training stops at the final decay or max_iters.
TrainResult train_biased(const ExampleSource& source, const TrainConfig& cfg,
                         const BatchHook& hook = {});

// Mean weighted cross-entropy of a batch and its gradient with respect to
// the weights (row-major, same layout as ClassifierParams::raw()).
// class_weights has K+1 entries (background first). Exposed for the
// finite-difference gradient check.
double batch_loss_and_gradient(const ClassifierParams& params,
                               std::span<const TrainExample> batch,
                               std::span<const double> class_weights,
                               std::vector<double>& grad);

// Inverse labeled-frequency weights normalized to mean 1 and clipped to
// [0.1, 10]; background keeps weight 1. Equal counts give exact unit weights.
std::vector<double> reweight_class_weights(std::span<const std::int64_t> labeled_counts);

}  // namespace relpu
