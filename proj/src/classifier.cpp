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
#include "relpu/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relpu {
namespace {

// Stable softmax over logits, in place.
void softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : z) v /= total;
}

}  // namespace

double ProbabilityVector::sum() const {
  double s = 0;
  for (double p : probs) s += p;
  return s;
}

ClassifierParams::ClassifierParams(int num_classes, int feature_dim)
    : num_classes_(num_classes),
      feature_dim_(feature_dim),
      weights_(static_cast<std::size_t>(num_classes + 1) * (feature_dim + 1), 0.0) {
  if (num_classes < 1 || feature_dim < 1)
    throw std::invalid_argument("ClassifierParams: bad shape");
}

double ClassifierParams::at(int cls, int j) const {
  return weights_[static_cast<std::size_t>(cls) * (feature_dim_ + 1) + j];
}

double& ClassifierParams::at(int cls, int j) {
  return weights_[static_cast<std::size_t>(cls) * (feature_dim_ + 1) + j];
}

bool ClassifierParams::finite() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [](double w) { return std::isfinite(w); });
}

ProbabilityVector predict(const ClassifierParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.feature_dim())
    throw std::invalid_argument("predict: feature dimension mismatch");
  const int rows = params.num_classes() + 1;
  const int d = params.feature_dim();
  ProbabilityVector out;
  out.probs.resize(rows);
  for (int c = 0; c < rows; ++c) {
    double z = params.at(c, d);  // bias
    for (int j = 0; j < d; ++j) z += params.at(c, j) * x[j];
    out.probs[c] = z;
  }
  softmax(out.probs);
  return out;
}

ProbabilityVector oracle_unbiased_posterior(const GenConfig& cfg,
                                            std::span<const double> x) {
  if (static_cast<int>(x.size()) != cfg.feature_dim)
    throw std::invalid_argument("oracle: feature dimension mismatch");
  const double inv_two_sigma2 = 1.0 / (2.0 * cfg.region_sigma * cfg.region_sigma);
  ProbabilityVector out;
  out.probs.resize(cfg.num_classes + 1);

  auto log_weight = [&](const std::vector<double>& center, double prior) {
    double d2 = 0;
    for (int j = 0; j < cfg.feature_dim; ++j) {
      const double t = x[j] - center[j];
      d2 += t * t;
    }
    return std::log(std::max(prior, 1e-300)) - d2 * inv_two_sigma2;
  };

  out.probs[0] = log_weight(cfg.background_center, cfg.background_fraction);
  for (int r = 1; r <= cfg.num_classes; ++r) {
    out.probs[r] = log_weight(cfg.region_centers[r - 1],
                              (1.0 - cfg.background_fraction) * cfg.class_prior[r - 1]);
  }
  softmax(out.probs);
  return out;
}

ProbabilityVector oracle_biased_posterior(const GenConfig& cfg,
                                          std::span<const double> x) {
  ProbabilityVector unbiased = oracle_unbiased_posterior(cfg, x);
  ProbabilityVector out;
  out.probs.resize(cfg.num_classes + 1);
  double labeled_mass = 0;
  for (int r = 1; r <= cfg.num_classes; ++r) {
    out.probs[r] = cfg.label_frequencies[r - 1] * unbiased.probs[r];
    labeled_mass += out.probs[r];
  }
  out.probs[0] = std::max(0.0, 1.0 - labeled_mass);
  return out;
}

}  // namespace relpu
