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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "relpu/corpus.hpp"
#include "relpu/freq_est.hpp"
#include "relpu/metrics.hpp"
#include "relpu/training.hpp"

namespace relpu::io {

// Writes to <path>.tmp and renames; readers never observe partial files.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a_bytes(const std::string& bytes);

nlohmann::json gen_config_to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Corpus directory: examples.jsonl + scenes.jsonl + manifest.json (config
// echo, c_true, checksum over the two record files). Floats round-trip
// exactly (shortest-round-trip decimals).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);  // verifies checksum

// Params directory: params.json (shape + schedule echo) + weights.f64
// (row-major little-endian float64 blob).
void write_params(const ClassifierParams& params, const TrainConfig& schedule,
                  const std::filesystem::path& dir);
ClassifierParams read_params(const std::filesystem::path& dir);

// {"setting": ..., "alpha": ..., "c": [...], "missing": [...],
//  "valid_counts": [...]}; alpha < 0 means not applicable (Train-Est).
nlohmann::json frequencies_to_json(const std::string& setting, double alpha,
                                   const EstimateResult& estimate);
EstimateResult frequencies_from_json(const nlohmann::json& j,
                                     std::string* setting = nullptr,
                                     double* alpha = nullptr);

std::string predictions_to_csv(const std::vector<std::vector<ScoredPrediction>>& by_image);

nlohmann::json snapshot_to_json(const RecallSnapshot& snap);
nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

// One flat CSV row per (setting, regime, K).
std::string report_csv_header();
std::string report_csv_rows(const std::string& setting, const std::string& estimator,
                            const MetricsReport& report);

}  // namespace relpu::io
