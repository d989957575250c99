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
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relpu/experiment.hpp"
#include "relpu/io.hpp"
#include "relpu/rng.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitStageError = 2;

// Relative output paths resolve under $RELPU_OUT when it is set.
fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("RELPU_OUT")) return fs::path(root) / p;
  return p;
}

json load_config_tree(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
  json tree = config_path.empty() ? json::object()
                                  : json::parse(relpu::io::read_file(config_path));
  for (const std::string& assignment : overrides)
    relpu::apply_override(tree, assignment);
  return tree;
}

void print_run_summary(const relpu::RunRecord& record) {
  for (const relpu::SettingOutcome& outcome : record.settings) {
    for (const auto& [est, report] : outcome.reports) {
      std::cout << to_string(outcome.setting) << " " << to_string(est);
      for (std::size_t i = 0; i < report.ks.size(); ++i) {
        if (!report.constraint.empty())
          std::cout << "  mR@" << report.ks[i] << "="
                    << report.constraint[i].per_class.mean_recall;
        if (!report.ng.empty())
          std::cout << "  ng-mR@" << report.ks[i] << "="
                    << report.ng[i].per_class.mean_recall;
      }
      std::cout << "\n";
    }
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"PU-learning debiasing for long-tailed relation classifiers"};
  app.require_subcommand(1);

  std::string config_path, corpus_dir, params_dir, freq_path, out_path;
  std::string setting_name = "predcls", estimator_name = "none";
  std::string dlfe_out, record_path;
  std::vector<std::string> overrides, record_paths;
  bool dump_predictions = false;
  bool renormalize = false;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    cmd->add_option("--set", overrides,
                    "dotted-path override, e.g. gen.num_classes=10");
  };

  CLI::App* cmd_gen = app.add_subcommand("gen", "generate a corpus");
  add_config(cmd_gen);
  cmd_gen->add_option("--out", out_path, "corpus directory")->required();

  CLI::App* cmd_train = app.add_subcommand("train", "train the biased model");
  add_config(cmd_train);
  cmd_train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  cmd_train->add_option("--setting", setting_name, "predcls|sgcls|sgdet");
  cmd_train->add_option("--out", out_path, "params directory")->required();
  cmd_train->add_option("--dlfe-out", dlfe_out,
                        "also run DLFE during training and write estimates here");

  CLI::App* cmd_estimate =
      app.add_subcommand("estimate", "post-training Train-Est estimation");
  add_config(cmd_estimate);
  cmd_estimate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  cmd_estimate->add_option("--params", params_dir, "params directory")->required();
  cmd_estimate->add_option("--setting", setting_name, "predcls|sgcls|sgdet");
  cmd_estimate->add_option("--out", out_path, "frequencies JSON path")->required();

  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "rank and score a corpus");
  add_config(cmd_evaluate);
  cmd_evaluate->add_option("--corpus", corpus_dir, "evaluation corpus directory")
      ->required();
  cmd_evaluate->add_option("--params", params_dir, "params directory")->required();
  cmd_evaluate->add_option("--setting", setting_name, "predcls|sgcls|sgdet");
  cmd_evaluate->add_option("--estimator", estimator_name,
                           "none|ground_truth_c|train_est|dlfe");
  cmd_evaluate->add_option("--freq", freq_path,
                           "frequencies JSON (train_est/dlfe estimators)");
  cmd_evaluate->add_option("--out", out_path, "report directory")->required();
  cmd_evaluate->add_flag("--dump-predictions", dump_predictions,
                         "also write predictions CSV");
  cmd_evaluate->add_flag("--renormalize", renormalize,
                         "ablation: renormalize recovered scores per pair");

  CLI::App* cmd_run = app.add_subcommand("run", "end-to-end experiment");
  add_config(cmd_run);
  cmd_run->add_option("--out", out_path, "output directory");

  CLI::App* cmd_plots = app.add_subcommand("plots", "emit figure data from a run record");
  cmd_plots->add_option("--record", record_path, "run_record.json path")->required();
  cmd_plots->add_option("--out", out_path, "plots directory")->required();

  CLI::App* cmd_compare = app.add_subcommand("compare", "tabulate runs side by side");
  cmd_compare->add_option("records", record_paths, "run_record.json paths")
      ->required()
      ->expected(-1);
  cmd_compare->add_option("--out", out_path, "comparison CSV path (stdout if absent)");

  CLI11_PARSE(app, argc, argv);

  if (cmd_gen->parsed()) {
    relpu::ExperimentConfig cfg =
        relpu::config_from_json(load_config_tree(config_path, overrides));
    cfg.validate();
    relpu::GenConfig gen = cfg.gen;
    gen.num_images = cfg.gen.num_images + cfg.eval_images;
    relpu::Corpus corpus = relpu::generate_corpus(gen);
    relpu::scar_delete(corpus.examples, corpus.c_true,
                       relpu::rng::derive(cfg.seed, "scar"));
    relpu::io::write_corpus(corpus, resolve_out(out_path));
    std::cout << "wrote corpus: " << corpus.scenes.size() << " scenes, "
              << corpus.examples.size() << " examples\n";
    return kExitOk;
  }

  if (cmd_train->parsed()) {
    relpu::ExperimentConfig cfg =
        relpu::config_from_json(load_config_tree(config_path, overrides));
    const relpu::Setting setting = relpu::setting_from_string(setting_name);
    const relpu::Corpus corpus = relpu::io::read_corpus(corpus_dir);
    std::vector<int> image_ids(corpus.scenes.size());
    for (std::size_t i = 0; i < image_ids.size(); ++i) image_ids[i] = static_cast<int>(i);
    const auto setting_id = static_cast<std::uint64_t>(setting);
    relpu::SettingSource source(&corpus, setting, image_ids,
                                relpu::rng::derive(cfg.seed, "setting", setting_id));
    relpu::TrainConfig train_cfg = cfg.train;
    train_cfg.rng_seed = relpu::rng::derive(cfg.seed, "train", setting_id);

    relpu::DlfeEstimator dlfe(corpus.config.num_classes, cfg.dlfe_momentum);
    relpu::BatchHook hook;
    std::vector<std::pair<int, double>> batch_valid;
    if (!dlfe_out.empty()) {
      hook = [&](const std::vector<relpu::TrainExample>& batch,
                 const std::vector<relpu::ProbabilityVector>& probs) {
        batch_valid.clear();
        for (std::size_t i = 0; i < batch.size(); ++i)
          if (batch[i].valid && batch[i].label > 0)
            batch_valid.emplace_back(batch[i].label, probs[i][batch[i].label]);
        dlfe.update(batch_valid);
      };
    }
    const relpu::TrainResult result = relpu::train_biased(source, train_cfg, hook);
    relpu::io::write_params(result.params, train_cfg, resolve_out(out_path));
    if (!dlfe_out.empty()) {
      relpu::io::atomic_write(
          resolve_out(dlfe_out),
          relpu::io::frequencies_to_json(setting_name, cfg.dlfe_momentum,
                                         dlfe.finalize())
                  .dump(2) +
              "\n");
    }
    std::cout << "trained " << result.iterations << " iterations, "
              << result.lr_decays << " lr decays\n";
    return kExitOk;
  }

  if (cmd_estimate->parsed()) {
    relpu::ExperimentConfig cfg =
        relpu::config_from_json(load_config_tree(config_path, overrides));
    const relpu::Setting setting = relpu::setting_from_string(setting_name);
    const relpu::Corpus corpus = relpu::io::read_corpus(corpus_dir);
    const relpu::ClassifierParams params = relpu::io::read_params(params_dir);
    std::vector<int> image_ids(corpus.scenes.size());
    for (std::size_t i = 0; i < image_ids.size(); ++i) image_ids[i] = static_cast<int>(i);
    relpu::SettingSource source(
        &corpus, setting, image_ids,
        relpu::rng::derive(cfg.seed, "setting", static_cast<std::uint64_t>(setting)));

    std::vector<std::vector<const std::vector<double>*>> groups(
        corpus.config.num_classes);
    std::vector<relpu::TrainExample> scratch;
    for (int i = 0; i < source.num_images(); ++i) {
      source.image_examples(relpu::ExampleSource::kCanonicalEpoch, i, scratch);
      for (const relpu::TrainExample& e : scratch)
        if (e.valid && e.label > 0) groups[e.label - 1].push_back(e.features);
    }
    const relpu::EstimateResult estimate = relpu::train_est(
        [&](std::span<const double> x) { return relpu::predict(params, x); }, groups);
    relpu::io::atomic_write(
        resolve_out(out_path),
        relpu::io::frequencies_to_json(setting_name, 0.0, estimate).dump(2) + "\n");
    std::cout << "estimated " << corpus.config.num_classes << " classes, "
              << estimate.missing_classes.size() << " missing\n";
    return kExitOk;
  }

  if (cmd_evaluate->parsed()) {
    relpu::ExperimentConfig cfg =
        relpu::config_from_json(load_config_tree(config_path, overrides));
    if (renormalize) cfg.renormalize_recovered = true;
    const relpu::Setting setting = relpu::setting_from_string(setting_name);
    const relpu::Estimator estimator = relpu::estimator_from_string(estimator_name);
    const relpu::Corpus corpus = relpu::io::read_corpus(corpus_dir);
    const relpu::ClassifierParams params = relpu::io::read_params(params_dir);

    relpu::LabelFrequencies frequencies;
    if (estimator == relpu::Estimator::ground_truth_c) {
      frequencies.values = corpus.c_true;
    } else if (estimator != relpu::Estimator::none) {
      if (freq_path.empty())
        throw std::invalid_argument("evaluate: --freq required for " + estimator_name);
      std::string freq_setting;
      const relpu::EstimateResult estimate = relpu::io::frequencies_from_json(
          json::parse(relpu::io::read_file(freq_path)), &freq_setting);
      if (freq_setting != setting_name)
        throw std::invalid_argument(
            "evaluate: frequencies were estimated under setting '" + freq_setting +
            "', requested '" + setting_name + "'");
      frequencies = estimate.frequencies;
    }

    const auto setting_seed =
        relpu::rng::derive(cfg.seed, "setting", static_cast<std::uint64_t>(setting));
    const int max_k = *std::max_element(cfg.metrics_k.begin(), cfg.metrics_k.end());
    const relpu::GroundTruthSet gt = relpu::GroundTruthSet::from_scenes(
        corpus.scenes, corpus.config.num_classes);

    std::vector<std::int64_t> labeled = corpus.labeled_counts();
    std::vector<int> frequency_order(corpus.config.num_classes);
    for (int r = 0; r < corpus.config.num_classes; ++r) frequency_order[r] = r + 1;
    std::stable_sort(frequency_order.begin(), frequency_order.end(),
                     [&](int a, int b) { return labeled[a - 1] > labeled[b - 1]; });

    relpu::MetricsReport report;
    report.ks = cfg.metrics_k;
    std::vector<std::vector<relpu::ScoredPrediction>> dump;
    for (const bool constraint : {true, false}) {
      if (constraint && !cfg.regime_constraint) continue;
      if (!constraint && !cfg.regime_ng) continue;
      std::vector<relpu::ImageEval> evals;
      std::vector<std::vector<std::uint8_t>> hits;
      std::vector<relpu::EvalImage> images;
      for (std::size_t i = 0; i < corpus.scenes.size(); ++i)
        images.push_back(relpu::eval_image(corpus, setting, static_cast<int>(i),
                                           setting_seed));
      for (std::size_t i = 0; i < images.size(); ++i) {
        std::vector<std::pair<relpu::PairKey, relpu::RecoveredScores>> scores;
        for (const relpu::TrainExample& cand : images[i].candidates) {
          const relpu::ProbabilityVector probs = relpu::predict(params, *cand.features);
          scores.emplace_back(cand.pair,
                              estimator == relpu::Estimator::none
                                  ? relpu::foreground_scores(probs)
                                  : relpu::recover(probs, frequencies,
                                                   cfg.renormalize_recovered));
        }
        relpu::ImageEval ev;
        ev.ranked = relpu::rank_predictions(images[i].image_id, scores, constraint, max_k);
        ev.gt = &gt.triples_by_image[i];
        ev.mapping = images[i].identity_mapping ? nullptr : &images[i].det_to_gt;
        hits.push_back(relpu::match_predictions(ev));
        evals.push_back(std::move(ev));
      }
      auto& out = constraint ? report.constraint : report.ng;
      for (int k : cfg.metrics_k)
        out.push_back(relpu::recall_snapshot(evals, hits, gt, k, frequency_order,
                                             relpu::Buckets{}));
      if (constraint && dump_predictions)
        for (relpu::ImageEval& ev : evals) dump.push_back(std::move(ev.ranked));
    }

    const fs::path dir = resolve_out(out_path);
    relpu::io::atomic_write(dir / "report.json",
                            relpu::io::report_to_json(report).dump(2) + "\n");
    relpu::io::atomic_write(dir / "report.csv",
                            relpu::io::report_csv_header() +
                                relpu::io::report_csv_rows(setting_name, estimator_name,
                                                           report));
    if (dump_predictions)
      relpu::io::atomic_write(dir / "predictions.csv",
                              relpu::io::predictions_to_csv(dump));
    if (!report.ng.empty())
      std::cout << "ng-mR@" << report.ks.back() << " = "
                << report.ng.back().per_class.mean_recall << "\n";
    return kExitOk;
  }

  if (cmd_run->parsed()) {
    json tree = load_config_tree(config_path, overrides);
    relpu::ExperimentConfig cfg = relpu::config_from_json(tree);
    if (!out_path.empty()) cfg.output_dir = resolve_out(out_path).string();
    if (cfg.output_dir.empty())
      throw std::invalid_argument("run: output directory required (--out, "
                                  "config output_dir, or RELPU_OUT)");
    const relpu::RunRecord record = relpu::run_experiment(cfg);
    print_run_summary(record);
    std::cout << "wall " << record.wall_seconds << "s -> " << cfg.output_dir << "\n";
    return kExitOk;
  }

  if (cmd_plots->parsed()) {
    const relpu::RunRecord record = relpu::run_record_from_json(
        json::parse(relpu::io::read_file(record_path)));
    relpu::emit_plot_data(record, resolve_out(out_path).string());
    return kExitOk;
  }

  if (cmd_compare->parsed()) {
    std::vector<relpu::RunRecord> records;
    for (const std::string& path : record_paths)
      records.push_back(
          relpu::run_record_from_json(json::parse(relpu::io::read_file(path))));
    const std::string csv = relpu::compare_runs(records);
    if (out_path.empty())
      std::cout << csv;
    else
      relpu::io::atomic_write(resolve_out(out_path), csv);
    return kExitOk;
  }

  return kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageError;
  }
}
