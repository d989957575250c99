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
#include "relpu/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "relpu/rng.hpp"

namespace relpu {
namespace {

struct Forward {
  std::vector<double> probs;  // K+1
  double log_prob_label = 0;
};

Forward forward_example(const ClassifierParams& params, const TrainExample& ex) {
  const int rows = params.num_classes() + 1;
  const int d = params.feature_dim();
  const std::vector<double>& x = *ex.features;
  Forward fwd;
  fwd.probs.resize(rows);
  for (int c = 0; c < rows; ++c) {
    double z = params.at(c, d);
    for (int j = 0; j < d; ++j) z += params.at(c, j) * x[j];
    fwd.probs[c] = z;
  }
  const double m = *std::max_element(fwd.probs.begin(), fwd.probs.end());
  double total = 0;
  for (double v : fwd.probs) total += std::exp(v - m);
  const double lse = m + std::log(total);
  fwd.log_prob_label = fwd.probs[ex.label] - lse;
  for (double& v : fwd.probs) v = std::exp(v - lse);
  return fwd;
}

void accumulate_gradient(const ClassifierParams& params, const TrainExample& ex,
                         const Forward& fwd, double weight,
                         std::vector<double>& grad) {
  const int rows = params.num_classes() + 1;
  const int d = params.feature_dim();
  const std::vector<double>& x = *ex.features;
  for (int c = 0; c < rows; ++c) {
    const double coeff = weight * (fwd.probs[c] - (c == ex.label ? 1.0 : 0.0));
    double* row = grad.data() + static_cast<std::size_t>(c) * (d + 1);
    for (int j = 0; j < d; ++j) row[j] += coeff * x[j];
    row[d] += coeff;
  }
}

// Partial Fisher-Yates: first `count` entries of `indices` become a uniform
// sample without replacement.
void sample_prefix(std::vector<int>& indices, std::size_t count,
                   std::mt19937_64& gen) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, indices.size() - 1);
    std::swap(indices[i], indices[pick(gen)]);
  }
}

// Mean weighted cross-entropy and its gradient; optionally keeps the
// per-example probabilities for the batch hook.
double forward_batch(const ClassifierParams& params,
                     std::span<const TrainExample> batch,
                     std::span<const double> class_weights,
                     std::vector<double>& grad,
                     std::vector<ProbabilityVector>* probs_out) {
  grad.assign(params.raw().size(), 0.0);
  if (probs_out) probs_out->resize(batch.size());
  if (batch.empty()) return 0.0;
  double loss = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Forward fwd = forward_example(params, batch[i]);
    const double w = class_weights[batch[i].label];
    loss -= w * fwd.log_prob_label;
    accumulate_gradient(params, batch[i], fwd, w, grad);
    if (probs_out) (*probs_out)[i].probs = std::move(fwd.probs);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= scale;
  return loss * scale;
}

}  // namespace

VectorSource::VectorSource(const std::vector<RelationExample>* examples,
                           int num_classes, int feature_dim)
    : examples_(examples), num_classes_(num_classes), feature_dim_(feature_dim) {
  int max_image = -1;
  for (const RelationExample& e : *examples_)
    max_image = std::max(max_image, e.image_id);
  by_image_.resize(max_image + 1);
  for (std::size_t i = 0; i < examples_->size(); ++i)
    by_image_[(*examples_)[i].image_id].push_back(static_cast<int>(i));
}

int VectorSource::num_images() const { return static_cast<int>(by_image_.size()); }

void VectorSource::image_examples(int /*epoch*/, int image_index,
                                  std::vector<TrainExample>& out) const {
  out.clear();
  for (int idx : by_image_[image_index]) {
    const RelationExample& e = (*examples_)[idx];
    out.push_back(TrainExample{e.image_id, e.pair, &e.features,
                               e.observed_label, /*valid=*/true});
  }
}

void TrainConfig::validate() const {
  if (lr_init <= 0) throw std::invalid_argument("train: lr_init must be positive");
  if (warmup_iters < 0) throw std::invalid_argument("train: warmup_iters negative");
  if (batch_size_images < 1)
    throw std::invalid_argument("train: batch_size_images must be >= 1");
  if (bg_to_fg_ratio <= 0)
    throw std::invalid_argument("train: bg_to_fg_ratio must be positive");
  if (max_pairs_per_image < 1)
    throw std::invalid_argument("train: max_pairs_per_image must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("train: max_iters must be >= 1");
  if (plateau_patience < 1)
    throw std::invalid_argument("train: plateau_patience must be >= 1");
  if (max_lr_decays < 0) throw std::invalid_argument("train: max_lr_decays negative");
  if (lr_decay_factor <= 1)
    throw std::invalid_argument("train: lr_decay_factor must exceed 1");
  if (eval_interval < 1) throw std::invalid_argument("train: eval_interval must be >= 1");
  if (holdout_fraction < 0 || holdout_fraction >= 1)
    throw std::invalid_argument("train: holdout_fraction outside [0,1)");
}

std::vector<double> reweight_class_weights(std::span<const std::int64_t> labeled_counts) {
  const int k = static_cast<int>(labeled_counts.size());
  std::vector<double> weights(k + 1, 1.0);
  std::vector<std::int64_t> present;
  for (std::int64_t n : labeled_counts)
    if (n > 0) present.push_back(n);
  if (present.empty()) return weights;
  // Exactly uniform counts must give exact unit weights.
  if (std::all_of(present.begin(), present.end(),
                  [&](std::int64_t n) { return n == present.front(); }))
    return weights;

  double inv_mean = 0;
  for (std::int64_t n : present) inv_mean += 1.0 / static_cast<double>(n);
  inv_mean /= static_cast<double>(present.size());
  for (int r = 0; r < k; ++r) {
    if (labeled_counts[r] <= 0) continue;
    const double w = (1.0 / static_cast<double>(labeled_counts[r])) / inv_mean;
    weights[r + 1] = std::clamp(w, 0.1, 10.0);
  }
  return weights;
}

double batch_loss_and_gradient(const ClassifierParams& params,
                               std::span<const TrainExample> batch,
                               std::span<const double> class_weights,
                               std::vector<double>& grad) {
  return forward_batch(params, batch, class_weights, grad, nullptr);
}

TrainResult train_biased(const ExampleSource& source, const TrainConfig& cfg,
                         const BatchHook& hook) {
  cfg.validate();
  const int n_images = source.num_images();
  if (n_images < 1) throw std::invalid_argument("train: empty corpus");
  const int num_classes = source.num_classes();
  const int d = source.feature_dim();

  // Held-out split for plateau detection: every cycle-th image.
  std::vector<int> train_images, holdout_images;
  const int cycle = cfg.holdout_fraction > 0
                        ? std::max(2, static_cast<int>(std::lround(1.0 / cfg.holdout_fraction)))
                        : 0;
  for (int i = 0; i < n_images; ++i) {
    if (cycle > 0 && i % cycle == cycle - 1 && n_images > 1)
      holdout_images.push_back(i);
    else
      train_images.push_back(i);
  }

  // Class weights from labeled counts over the canonical training stream.
  std::vector<double> class_weights(num_classes + 1, 1.0);
  std::int64_t total_labeled = 0;
  {
    std::vector<std::int64_t> counts(num_classes, 0);
    std::vector<TrainExample> scratch;
    for (int img : train_images) {
      source.image_examples(ExampleSource::kCanonicalEpoch, img, scratch);
      for (const TrainExample& e : scratch)
        if (e.label > 0) {
          ++counts[e.label - 1];
          ++total_labeled;
        }
    }
    if (cfg.reweight) class_weights = reweight_class_weights(counts);
  }
  if (total_labeled == 0)
    throw std::invalid_argument("train: no labeled examples in training split");

  // Fixed validation set, canonical realization, unweighted loss.
  std::vector<TrainExample> holdout;
  {
    std::vector<TrainExample> scratch;
    for (int img : holdout_images) {
      source.image_examples(ExampleSource::kCanonicalEpoch, img, scratch);
      holdout.insert(holdout.end(), scratch.begin(), scratch.end());
    }
  }
  const std::vector<double> unit_weights(num_classes + 1, 1.0);

  TrainResult result;
  result.params = ClassifierParams(num_classes, d);
  std::vector<double> grad(result.params.raw().size(), 0.0);

  double lr_scale = 1.0;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_evals = 0;
  bool stop = false;
  int iter = 0;

  std::vector<TrainExample> batch, image_batch;
  std::vector<int> bg_indices;

  for (int epoch = 0; !stop; ++epoch) {
    std::vector<int> order = train_images;
    {
      auto gen = rng::stream(cfg.rng_seed, "order", static_cast<std::uint64_t>(epoch));
      sample_prefix(order, order.size(), gen);
    }
    double epoch_loss = 0;
    int epoch_batches = 0;

    for (std::size_t pos = 0; pos < order.size() && !stop;
         pos += cfg.batch_size_images) {
      batch.clear();
      const std::size_t end = std::min(order.size(), pos + cfg.batch_size_images);
      for (std::size_t b = pos; b < end; ++b) {
        const int img = order[b];
        source.image_examples(epoch, img, image_batch);
        // Keep all labeled pairs; sample background at bg_to_fg_ratio.
        bg_indices.clear();
        int fg = 0;
        for (std::size_t i = 0; i < image_batch.size(); ++i) {
          if (image_batch[i].label > 0) {
            if (fg < cfg.max_pairs_per_image) {
              batch.push_back(image_batch[i]);
              ++fg;
            }
          } else {
            bg_indices.push_back(static_cast<int>(i));
          }
        }
        const long want_bg =
            std::lround(cfg.bg_to_fg_ratio * static_cast<double>(std::max(fg, 1)));
        const std::size_t bg_n = std::min<std::size_t>(
            {bg_indices.size(), static_cast<std::size_t>(std::max<long>(want_bg, 0)),
             static_cast<std::size_t>(std::max(cfg.max_pairs_per_image - fg, 0))});
        auto gen = rng::stream(cfg.rng_seed, "sample",
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(img));
        sample_prefix(bg_indices, bg_n, gen);
        for (std::size_t i = 0; i < bg_n; ++i)
          batch.push_back(image_batch[bg_indices[i]]);
      }
      if (batch.empty()) continue;

      // Forward pass; probabilities are shared with the batch hook.
      std::vector<ProbabilityVector> probs;
      const double loss =
          forward_batch(result.params, batch, class_weights, grad, &probs);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at iteration " +
                                 std::to_string(iter));
      if (hook) hook(batch, probs);

      ++iter;
      const double lr =
          cfg.lr_init * lr_scale *
          (cfg.warmup_iters > 0
               ? std::min(1.0, static_cast<double>(iter) / cfg.warmup_iters)
               : 1.0);
      std::span<double> w = result.params.raw();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];

      epoch_loss += loss;
      ++epoch_batches;

      if (!holdout.empty() && iter % cfg.eval_interval == 0) {
        std::vector<double> tmp_grad;
        const double val = batch_loss_and_gradient(result.params, holdout,
                                                   unit_weights, tmp_grad);
        result.final_validation_loss = val;
        if (val < best_val - cfg.plateau_min_delta) {
          best_val = val;
          bad_evals = 0;
        } else if (++bad_evals >= cfg.plateau_patience) {
          bad_evals = 0;
          if (result.lr_decays >= cfg.max_lr_decays) {
            stop = true;  // final decay step reached: early stop
          } else {
            lr_scale /= cfg.lr_decay_factor;
            ++result.lr_decays;
          }
        }
      }
      if (iter >= cfg.max_iters) stop = true;
    }
    if (epoch_batches > 0)
      result.epoch_mean_loss.push_back(epoch_loss / epoch_batches);
  }
  result.iterations = iter;
  if (!result.params.finite())
    throw std::runtime_error("train: non-finite parameters after training");
  return result;
}

}  // namespace relpu
