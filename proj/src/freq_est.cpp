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
#include "relpu/freq_est.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relpu {
namespace {

double clamp_estimate(double c) {
  return std::clamp(c, kFrequencyFloor, 1.0);
}

// Median of the estimated classes (average of the two central values for
// even counts), applied to classes that never saw a valid example.
EstimateResult finish_estimates(std::vector<double> estimates,
                                std::vector<std::int64_t> valid_counts,
                                const std::vector<bool>& estimated) {
  std::vector<double> seen;
  for (std::size_t r = 0; r < estimates.size(); ++r)
    if (estimated[r]) seen.push_back(estimates[r]);
  if (seen.empty())
    throw std::runtime_error(
        "frequency estimation: no class has a valid example");

  std::sort(seen.begin(), seen.end());
  const std::size_t n = seen.size();
  const double median =
      n % 2 == 1 ? seen[n / 2] : 0.5 * (seen[n / 2 - 1] + seen[n / 2]);

  EstimateResult result;
  result.frequencies.values.resize(estimates.size());
  result.valid_counts = std::move(valid_counts);
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    if (!estimated[r]) {
      result.missing_classes.push_back(static_cast<int>(r) + 1);
      result.frequencies.values[r] = clamp_estimate(median);
    } else {
      result.frequencies.values[r] = clamp_estimate(estimates[r]);
    }
  }
  return result;
}

}  // namespace

void LabelFrequencies::validate() const {
  for (double c : values)
    if (!(c > 0.0 && c <= 1.0))
      throw std::invalid_argument("label frequency outside (0,1]");
}

EstimateResult train_est(
    const PredictFn& predict_fn,
    const std::vector<std::vector<const std::vector<double>*>>& examples_by_class) {
  const std::size_t k = examples_by_class.size();
  std::vector<double> estimates(k, 0.0);
  std::vector<std::int64_t> valid_counts(k, 0);
  std::vector<bool> estimated(k, false);

  for (std::size_t r = 0; r < k; ++r) {
    const auto& group = examples_by_class[r];
    valid_counts[r] = static_cast<std::int64_t>(group.size());
    if (group.empty()) continue;
    double sum = 0;
    for (const std::vector<double>* x : group) {
      const ProbabilityVector p = predict_fn(*x);
      sum += p[static_cast<int>(r) + 1];
    }
    estimates[r] = sum / static_cast<double>(group.size());
    estimated[r] = true;
  }
  return finish_estimates(std::move(estimates), std::move(valid_counts), estimated);
}

DlfeEstimator::DlfeEstimator(int num_classes, double momentum)
    : momentum_(momentum),
      ema_(num_classes, 0.5),
      update_counts_(num_classes, 0),
      valid_counts_(num_classes, 0),
      batch_sum_(num_classes, 0.0),
      batch_count_(num_classes, 0) {
  if (num_classes < 1)
    throw std::invalid_argument("dlfe: num_classes must be >= 1");
  if (!(momentum > 0.0 && momentum <= 1.0))
    throw std::invalid_argument("dlfe: momentum outside (0,1]");
}

void DlfeEstimator::update(std::span<const std::pair<int, double>> batch_valid) {
  const int k = static_cast<int>(ema_.size());
  std::fill(batch_sum_.begin(), batch_sum_.end(), 0.0);
  std::fill(batch_count_.begin(), batch_count_.end(), 0);
  for (const auto& [cls, prob] : batch_valid) {
    if (cls < 1 || cls > k)
      throw std::invalid_argument("dlfe: class out of range");
    if (!(prob >= 0.0 && prob <= 1.0))
      throw std::invalid_argument("dlfe: probability outside [0,1]");
    batch_sum_[cls - 1] += prob;
    ++batch_count_[cls - 1];
  }
  for (int r = 0; r < k; ++r) {
    if (batch_count_[r] == 0) continue;  // gating: class absent from batch
    const double batch_mean = batch_sum_[r] / batch_count_[r];
    ema_[r] = update_counts_[r] == 0
                  ? batch_mean
                  : momentum_ * batch_mean + (1.0 - momentum_) * ema_[r];
    ++update_counts_[r];
    valid_counts_[r] += batch_count_[r];
  }
}

EstimateResult DlfeEstimator::finalize() const {
  std::vector<bool> estimated(ema_.size());
  for (std::size_t r = 0; r < ema_.size(); ++r)
    estimated[r] = update_counts_[r] > 0;
  return finish_estimates(ema_, {valid_counts_.begin(), valid_counts_.end()},
                          estimated);
}

}  // namespace relpu
