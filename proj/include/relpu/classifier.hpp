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

#include <span>
#include <vector>

#include "relpu/corpus.hpp"

namespace relpu {

// Distribution over the K+1 classes (index 0 = background). Entries are
// non-negative and sum to 1 within 1e-9.
struct ProbabilityVector {
  std::vector<double> probs;

  int num_classes() const { return static_cast<int>(probs.size()) - 1; }
  double operator[](int cls) const { return probs[static_cast<std::size_t>(cls)]; }
  double sum() const;
};

// Linear softmax head over K+1 classes: logits = W * [x; 1], with W of shape
// (K+1) x (d+1), last column the bias term. Immutable after training.
class ClassifierParams {
 public:
  ClassifierParams() = default;
  ClassifierParams(int num_classes, int feature_dim);  // zero-initialized

  int num_classes() const { return num_classes_; }
  int feature_dim() const { return feature_dim_; }

  double at(int cls, int j) const;
  double& at(int cls, int j);

  std::span<const double> raw() const { return weights_; }
  std::span<double> raw() { return weights_; }
  bool finite() const;

 private:
  int num_classes_ = 0;
  int feature_dim_ = 0;
  std::vector<double> weights_;  // row-major (K+1) x (d+1)
};

// softmax(W * [x; 1]); deterministic, pure.
ProbabilityVector predict(const ClassifierParams& params, std::span<const double> x);

// Exact posterior p(y|x) of the generative model, length K+1 with the
// background at index 0 (Bayes over the Gaussian regions).
ProbabilityVector oracle_unbiased_posterior(const GenConfig& cfg,
                                            std::span<const double> x);

// Exact biased posterior of the generative model under SCAR deletion:
// p(s=r|x) = c_r * p(y=r|x) and p(s=0|x) = 1 - sum_r c_r * p(y=r|x).
ProbabilityVector oracle_biased_posterior(const GenConfig& cfg,
                                          std::span<const double> x);

}  // namespace relpu
