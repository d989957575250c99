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
#include <utility>
#include <vector>

#include "relpu/classifier.hpp"

namespace relpu {

// Per-class label frequencies c in (0,1]^K: the fraction of class-r
// positives that carry a label, and the constant linking biased and
// unbiased posteriors.
struct LabelFrequencies {
  std::vector<double> values;  // class r at values[r-1]

  int num_classes() const { return static_cast<int>(values.size()); }
  double for_class(int r) const { return values[static_cast<std::size_t>(r) - 1]; }
  void validate() const;  // throws if any entry is outside (0,1]
};

// Estimates below this floor are clamped up so that recovery never divides
// by (near) zero.
inline constexpr double kFrequencyFloor = 1e-4;

struct EstimateResult {
  LabelFrequencies frequencies;
  std::vector<int> missing_classes;        // classes that got the median remedy
  std::vector<std::int64_t> valid_counts;  // valid examples seen per class
};

using PredictFn = std::function<ProbabilityVector(std::span<const double>)>;

// Post-training estimator: c_r is the average biased probability
// p(s=r|x) over the valid labeled examples of class r. Classes without a
// single valid example are assigned the median of the estimated classes and
// reported in missing_classes. Throws if every class is missing.
EstimateResult train_est(
    const PredictFn& predict_fn,
    const std::vector<std::vector<const std::vector<double>*>>& examples_by_class);

// Dynamic estimator: an exponential moving average of in-batch mean biased
// probabilities, updated for class r only when the batch holds at least one
// valid example of r. The first update copies the batch mean so the start
// is bias-free; later updates apply ema = momentum*batch + (1-momentum)*ema.
class DlfeEstimator {
 public:
  DlfeEstimator(int num_classes, double momentum);  // momentum in (0,1]

  // batch_valid: (class r, biased probability p(s=r|x)) for each valid
  // labeled example of the batch. Probabilities must lie in [0,1].
  void update(std::span<const std::pair<int, double>> batch_valid);

  // Median remedy + clamp, as in train_est. Throws if no class was updated.
  EstimateResult finalize() const;

  double momentum() const { return momentum_; }
  std::span<const double> ema() const { return ema_; }
  std::span<const std::int64_t> update_counts() const { return update_counts_; }
  std::span<const std::int64_t> valid_counts() const { return valid_counts_; }

 private:
  double momentum_;
  std::vector<double> ema_;
  std::vector<std::int64_t> update_counts_;  // batches contributing per class
  std::vector<std::int64_t> valid_counts_;   // valid examples seen per class
  std::vector<double> batch_sum_;            // scratch
  std::vector<int> batch_count_;             // scratch
};

}  // namespace relpu
