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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relpu/freq_est.hpp"
#include "relpu/metrics.hpp"
#include "relpu/settings.hpp"

namespace relpu {

inline constexpr std::string_view kVersion = "relpu 0.1.0";

// How ranking scores are produced at inference: the biased probabilities
// as-is, or recovery with the true / Train-Est / DLFE label frequencies.
enum class Estimator { none, ground_truth_c, train_est, dlfe };

std::string_view to_string(Estimator estimator);
Estimator estimator_from_string(std::string_view name);

struct ExperimentConfig {
  GenConfig gen;
  TrainConfig train;
  std::vector<Setting> settings{Setting::predcls};
  std::vector<Estimator> estimators{Estimator::none, Estimator::dlfe};
  std::vector<int> metrics_k{20, 50, 100};
  bool regime_constraint = true;
  bool regime_ng = true;
  int eval_images = 50;
  double dlfe_momentum = 0.1;
  bool renormalize_recovered = false;  // ablation flag
  bool dump_predictions = false;
  std::string output_dir;
  std::uint64_t seed = 1;

  void validate() const;
};

// Declarative config tree. gen.class_prior accepts an array or
// {"kind":"geometric","ratio":r}; gen.label_frequencies accepts an array or
// {"kind":"linear","head":h,"tail":t}; region centers default to the
// deterministic grid at gen.region_spacing_sigmas (default 10) sigmas.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Dotted-path leaf override, e.g. "gen.num_classes=10" or
// "settings=[\"predcls\"]". Values parse as JSON, bare words as strings.
void apply_override(nlohmann::json& tree, const std::string& assignment);

// Hash of the canonicalized (key-sorted) config JSON; stable under field
// reordering.
std::string config_hash(const nlohmann::json& canonical);

struct SettingOutcome {
  Setting setting = Setting::predcls;
  std::vector<std::int64_t> labeled_counts;          // corpus labels, training split
  std::vector<std::int64_t> train_est_valid_counts;  // one canonical pass
  std::vector<std::int64_t> dlfe_valid_counts;       // accumulated while training
  int train_iterations = 0;
  int train_epochs = 0;
  std::map<Estimator, EstimateResult> estimates;     // train_est / dlfe entries
  std::map<Estimator, MetricsReport> reports;
  // Wall-clock per estimator: estimation cost (for dlfe only the finalize;
  // its per-batch updates ride along with training) and evaluation cost.
  std::map<Estimator, double> estimate_seconds;
  std::map<Estimator, double> evaluate_seconds;
};

struct RunRecord {
  std::string version{kVersion};
  std::string config_hash;
  std::string gen_hash;
  std::vector<double> c_true;
  std::vector<int> metrics_k;
  std::vector<int> frequency_order;  // class ids, most frequent first
  std::vector<SettingOutcome> settings;
  double wall_seconds = 0;

  const SettingOutcome& outcome(Setting setting) const;
};

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

// Full pipeline: corpus -> per-setting biased training (DLFE hook attached)
// -> estimation -> recovery -> evaluation. Estimates are produced per
// setting and never reused across settings. When output_dir is set, reports
// are written atomically and a failed run removes what it wrote.
RunRecord run_experiment(const ExperimentConfig& cfg);

// Tab-separated figure data: per-class valid-example ratios (Train-Est vs
// DLFE), estimated label frequencies per setting/estimator, per-class
// ng-recall deltas against the "none" baseline.
void emit_plot_data(const RunRecord& record, const std::string& dir);

// Comparison table: one row per (record, estimator), one column per
// (setting, regime, K) mean recall. Records must share the gen config hash.
std::string compare_runs(std::span<const RunRecord> records);

}  // namespace relpu
