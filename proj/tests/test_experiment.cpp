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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "relpu/experiment.hpp"
#include "relpu/io.hpp"

using namespace relpu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Small long-tailed setup: enough GT pairs per image that the top-20 budget
// is contested, which is what recovery is supposed to fix.
ExperimentConfig small_config() {
  json tree{
      {"seed", 5},
      {"gen",
       {{"num_classes", 12},
        {"feature_dim", 6},
        {"class_prior", {{"kind", "geometric"}, {"ratio", 0.7}}},
        {"label_frequencies", {{"kind", "linear"}, {"head", 0.9}, {"tail", 0.2}}},
        {"background_fraction", 0.35},
        {"num_images", 60},
        {"pairs_per_image", 42}}},
      {"train",
       {{"lr_init", 3.0},
        {"max_iters", 1200},
        {"warmup_iters", 200},
        {"eval_interval", 100}}},
      {"settings", {"predcls"}},
      {"estimators", {"none", "ground_truth_c"}},
      {"metrics_k", {20}},
      {"eval_images", 30}};
  return config_from_json(tree);
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("recovering with the true frequencies beats the biased ranking") {
  ExperimentConfig cfg = small_config();
  const RunRecord record = run_experiment(cfg);
  const SettingOutcome& outcome = record.outcome(Setting::predcls);
  const MetricsReport& none = outcome.reports.at(Estimator::none);
  const MetricsReport& truth = outcome.reports.at(Estimator::ground_truth_c);
  CHECK(truth.constraint[0].per_class.mean_recall >
        none.constraint[0].per_class.mean_recall);
  CHECK(truth.ng[0].per_class.mean_recall > none.ng[0].per_class.mean_recall);
  // On this corpus the ng regime also dominates the constraint one.
  CHECK(none.ng[0].per_class.mean_recall >=
        none.constraint[0].per_class.mean_recall);
}

TEST_CASE("uniform frequencies leave the ranking untouched") {
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["gen"]["label_frequencies"] = {{"kind", "constant"}, {"value", 0.5}};
  cfg = config_from_json(tree);
  const RunRecord record = run_experiment(cfg);
  const SettingOutcome& outcome = record.outcome(Setting::predcls);
  const MetricsReport& none = outcome.reports.at(Estimator::none);
  const MetricsReport& truth = outcome.reports.at(Estimator::ground_truth_c);
  // Dividing every class by the same constant rescales scores uniformly:
  // identical rankings, identical metrics.
  CHECK(io::report_to_json(none) == io::report_to_json(truth));
}

TEST_CASE("identical configs produce byte-identical metric files") {
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["settings"] = {"predcls", "sgcls"};
  cfg = config_from_json(tree);
  const fs::path dir_a = temp_dir("relpu_run_a");
  const fs::path dir_b = temp_dir("relpu_run_b");
  cfg.output_dir = dir_a.string();
  run_experiment(cfg);
  cfg.output_dir = dir_b.string();
  run_experiment(cfg);
  CHECK(io::read_file(dir_a / "metrics.json") == io::read_file(dir_b / "metrics.json"));
  CHECK(io::read_file(dir_a / "metrics.csv") == io::read_file(dir_b / "metrics.csv"));
}

TEST_CASE("the sgcls analogue sits between predcls and sgdet") {
  // GT boxes with noisy object labels: pairs whose labels survive stay
  // valid, detection misses do not exist, so valid counts fall between the
  // other two settings.
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["settings"] = {"predcls", "sgcls", "sgdet"};
  tree["estimators"] = {"none", "train_est"};
  tree["gen"]["detection"] = {{"miss_prob", 0.4},
                              {"box_jitter_sigma", 0.02},
                              {"label_error_prob", 0.3}};
  cfg = config_from_json(tree);
  const RunRecord record = run_experiment(cfg);

  auto totals = [&](Setting s) {
    std::int64_t total = 0;
    for (std::int64_t c : record.outcome(s).train_est_valid_counts) total += c;
    return total;
  };
  const std::int64_t predcls = totals(Setting::predcls);
  const std::int64_t sgcls = totals(Setting::sgcls);
  const std::int64_t sgdet = totals(Setting::sgdet);
  CHECK(predcls > sgcls);
  CHECK(sgcls > sgdet);
  // predcls uses every labeled pair.
  std::int64_t labeled = 0;
  for (std::int64_t c : record.outcome(Setting::predcls).labeled_counts)
    labeled += c;
  CHECK(predcls == labeled);
}

TEST_CASE("plot data has one row per class and dominance holds") {
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["settings"] = {"sgdet"};
  tree["estimators"] = {"none", "train_est", "dlfe"};
  tree["gen"]["num_images"] = 50;
  tree["train"]["max_iters"] = 600;
  cfg = config_from_json(tree);
  const RunRecord record = run_experiment(cfg);

  const fs::path dir = temp_dir("relpu_plots");
  emit_plot_data(record, dir.string());

  const std::string valid = io::read_file(dir / "valid_ratio_sgdet.tsv");
  std::istringstream lines(valid);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream cols(line);
    std::string cls, labeled, te, te_ratio, dl_total, dl_epoch, dl_ratio;
    std::getline(cols, cls, '\t');
    std::getline(cols, labeled, '\t');
    std::getline(cols, te, '\t');
    std::getline(cols, te_ratio, '\t');
    std::getline(cols, dl_total, '\t');
    std::getline(cols, dl_epoch, '\t');
    std::getline(cols, dl_ratio, '\t');
    CHECK(std::stod(dl_ratio) >= std::stod(te_ratio));
  }
  CHECK(rows == 12);

  const std::string deltas = io::read_file(dir / "recall_delta_sgdet.tsv");
  std::istringstream delta_lines(deltas);
  std::getline(delta_lines, line);
  CHECK(line.find("none") != std::string::npos);
  // The none column is the baseline against itself: all zeros.
  std::size_t none_col = 0;
  {
    std::istringstream header(line);
    std::string col;
    std::size_t idx = 0;
    while (std::getline(header, col, '\t')) {
      if (col == "none") none_col = idx;
      ++idx;
    }
  }
  while (std::getline(delta_lines, line)) {
    if (line.empty()) continue;
    std::istringstream cols(line);
    std::string col;
    for (std::size_t idx = 0; std::getline(cols, col, '\t'); ++idx)
      if (idx == none_col) CHECK(std::stod(col) == 0.0);
  }

  CHECK(io::read_file(dir / "estimated_c.tsv").find("sgdet.dlfe") !=
        std::string::npos);
}

TEST_CASE("comparison tables require a shared corpus") {
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["estimators"] = {"ground_truth_c"};
  cfg = config_from_json(tree);
  const RunRecord a = run_experiment(cfg);
  tree["train"]["reweight"] = true;
  const RunRecord b = run_experiment(config_from_json(tree));

  const std::string csv = compare_runs(std::vector<RunRecord>{a, b});
  int data_rows = 0;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line.find("predcls.ng.mR@20") != std::string::npos);
  while (std::getline(lines, line))
    if (!line.empty()) ++data_rows;
  CHECK(data_rows == 2);

  RunRecord other = b;
  other.gen_hash = "different";
  CHECK_THROWS_AS(compare_runs(std::vector<RunRecord>{a, other}),
                  std::invalid_argument);
}

TEST_CASE("config hashing is order independent and overrides reach leaves") {
  json a{{"seed", 3}, {"gen", {{"num_classes", 5}, {"feature_dim", 2}}}};
  json b{{"gen", {{"feature_dim", 2}, {"num_classes", 5}}}, {"seed", 3}};
  CHECK(config_hash(a) == config_hash(b));

  json tree = json::object();
  apply_override(tree, "gen.num_classes=10");
  apply_override(tree, "settings=[\"sgdet\"]");
  apply_override(tree, "train.reweight=true");
  CHECK(tree["gen"]["num_classes"] == 10);
  CHECK(tree["settings"][0] == "sgdet");
  CHECK(tree["train"]["reweight"] == true);
  CHECK_THROWS_AS(apply_override(tree, "no_equals_sign"), std::invalid_argument);
}

TEST_CASE("run records round-trip through json") {
  ExperimentConfig cfg = small_config();
  json tree = config_to_json(cfg);
  tree["estimators"] = {"none", "ground_truth_c"};
  cfg = config_from_json(tree);
  const RunRecord record = run_experiment(cfg);
  const RunRecord back = run_record_from_json(run_record_to_json(record));
  CHECK(back.config_hash == record.config_hash);
  CHECK(back.gen_hash == record.gen_hash);
  CHECK(back.c_true == record.c_true);
  CHECK(back.frequency_order == record.frequency_order);
  REQUIRE(back.settings.size() == 1);
  CHECK(io::report_to_json(back.settings[0].reports.at(Estimator::none)) ==
        io::report_to_json(record.settings[0].reports.at(Estimator::none)));
}
