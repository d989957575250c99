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
#include "relpu/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "relpu/io.hpp"
#include "relpu/recovery.hpp"
#include "relpu/rng.hpp"

namespace relpu {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::none: return "none";
    case Estimator::ground_truth_c: return "ground_truth_c";
    case Estimator::train_est: return "train_est";
    case Estimator::dlfe: return "dlfe";
  }
  return "?";
}

Estimator estimator_from_string(std::string_view name) {
  if (name == "none") return Estimator::none;
  if (name == "ground_truth_c") return Estimator::ground_truth_c;
  if (name == "train_est") return Estimator::train_est;
  if (name == "dlfe") return Estimator::dlfe;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

void ExperimentConfig::validate() const {
  gen.validate();
  train.validate();
  if (settings.empty()) throw std::invalid_argument("config: settings empty");
  if (estimators.empty()) throw std::invalid_argument("config: estimators empty");
  if (metrics_k.empty()) throw std::invalid_argument("config: metrics_k empty");
  for (int k : metrics_k)
    if (k < 1) throw std::invalid_argument("config: metrics_k entries must be >= 1");
  if (!regime_constraint && !regime_ng)
    throw std::invalid_argument("config: no evaluation regime enabled");
  if (eval_images < 1) throw std::invalid_argument("config: eval_images must be >= 1");
  if (!(dlfe_momentum > 0 && dlfe_momentum <= 1))
    throw std::invalid_argument("config: dlfe_momentum outside (0,1]");
}

namespace {

GenConfig default_gen_config() {
  GenConfig gen;
  gen.num_classes = 20;
  gen.feature_dim = 8;
  gen.class_prior = geometric_prior(gen.num_classes, 0.7);
  gen.label_frequencies = linear_frequencies(gen.num_classes, 0.9, 0.2);
  gen.region_sigma = 0.05;
  gen.background_fraction = 0.5;
  gen.num_images = 150;
  gen.pairs_per_image = 42;
  gen.num_object_classes = 10;
  gen.detection = DetectionNoise{0.3, 0.01, 0.1};
  assign_grid_centers(gen, 10.0);
  return gen;
}

std::vector<double> parse_prior(const json& spec, int num_classes) {
  if (spec.is_array()) return spec.get<std::vector<double>>();
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "geometric")
    return geometric_prior(num_classes, spec.at("ratio").get<double>());
  if (kind == "uniform")
    return std::vector<double>(num_classes, 1.0 / num_classes);
  throw std::invalid_argument("config: unknown class_prior kind: " + kind);
}

std::vector<double> parse_frequencies(const json& spec, int num_classes) {
  if (spec.is_array()) return spec.get<std::vector<double>>();
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "linear")
    return linear_frequencies(num_classes, spec.at("head").get<double>(),
                              spec.at("tail").get<double>());
  if (kind == "constant")
    return std::vector<double>(num_classes, spec.at("value").get<double>());
  throw std::invalid_argument("config: unknown label_frequencies kind: " + kind);
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{1});

  GenConfig gen = default_gen_config();
  const json jgen = j.value("gen", json::object());
  gen.num_classes = jgen.value("num_classes", gen.num_classes);
  gen.feature_dim = jgen.value("feature_dim", gen.feature_dim);
  gen.class_prior = jgen.contains("class_prior")
                        ? parse_prior(jgen.at("class_prior"), gen.num_classes)
                        : geometric_prior(gen.num_classes, 0.7);
  gen.label_frequencies =
      jgen.contains("label_frequencies")
          ? parse_frequencies(jgen.at("label_frequencies"), gen.num_classes)
          : linear_frequencies(gen.num_classes, 0.9, 0.2);
  gen.region_sigma = jgen.value("region_sigma", gen.region_sigma);
  gen.background_fraction = jgen.value("background_fraction", gen.background_fraction);
  gen.num_images = jgen.value("num_images", gen.num_images);
  gen.pairs_per_image = jgen.value("pairs_per_image", gen.pairs_per_image);
  gen.num_object_classes = jgen.value("num_object_classes", gen.num_object_classes);
  if (jgen.contains("detection")) {
    const json& det = jgen.at("detection");
    gen.detection.miss_prob = det.value("miss_prob", 0.0);
    gen.detection.box_jitter_sigma = det.value("box_jitter_sigma", 0.0);
    gen.detection.label_error_prob = det.value("label_error_prob", 0.0);
  }
  if (jgen.contains("region_centers")) {
    gen.region_centers = jgen.at("region_centers").get<std::vector<std::vector<double>>>();
    gen.background_center = jgen.at("background_center").get<std::vector<double>>();
  } else {
    assign_grid_centers(gen, jgen.value("region_spacing_sigmas", 10.0));
  }
  gen.rng_seed = jgen.contains("rng_seed")
                     ? jgen.at("rng_seed").get<std::uint64_t>()
                     : rng::derive(cfg.seed, "corpus");
  cfg.gen = std::move(gen);

  cfg.train = io::train_config_from_json(j.value("train", json::object()));

  if (j.contains("settings")) {
    cfg.settings.clear();
    for (const json& s : j.at("settings"))
      cfg.settings.push_back(setting_from_string(s.get<std::string>()));
  }
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const json& e : j.at("estimators"))
      cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));
  }
  if (j.contains("metrics_k")) cfg.metrics_k = j.at("metrics_k").get<std::vector<int>>();
  if (j.contains("regimes")) {
    cfg.regime_constraint = false;
    cfg.regime_ng = false;
    for (const json& r : j.at("regimes")) {
      const std::string name = r.get<std::string>();
      if (name == "constraint")
        cfg.regime_constraint = true;
      else if (name == "ng")
        cfg.regime_ng = true;
      else
        throw std::invalid_argument("config: unknown regime: " + name);
    }
  }
  cfg.eval_images = j.value("eval_images", cfg.eval_images);
  cfg.dlfe_momentum = j.value("dlfe_momentum", cfg.dlfe_momentum);
  cfg.renormalize_recovered = j.value("renormalize_recovered", false);
  cfg.dump_predictions = j.value("dump_predictions", false);
  cfg.output_dir = j.value("output_dir", std::string());
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["gen"] = io::gen_config_to_json(cfg.gen);
  j["train"] = io::train_config_to_json(cfg.train);
  json settings = json::array(), estimators = json::array(), regimes = json::array();
  for (Setting s : cfg.settings) settings.push_back(std::string(to_string(s)));
  for (Estimator e : cfg.estimators) estimators.push_back(std::string(to_string(e)));
  if (cfg.regime_constraint) regimes.push_back("constraint");
  if (cfg.regime_ng) regimes.push_back("ng");
  j["settings"] = settings;
  j["estimators"] = estimators;
  j["regimes"] = regimes;
  j["metrics_k"] = cfg.metrics_k;
  j["eval_images"] = cfg.eval_images;
  j["dlfe_momentum"] = cfg.dlfe_momentum;
  j["renormalize_recovered"] = cfg.renormalize_recovered;
  j["dump_predictions"] = cfg.dump_predictions;
  j["output_dir"] = cfg.output_dir;
  return j;
}

void apply_override(json& tree, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw std::invalid_argument("override: empty key in " + path);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const json& canonical) {
  std::ostringstream out;
  out << std::hex << io::fnv1a_bytes(canonical.dump());
  return out.str();
}

const SettingOutcome& RunRecord::outcome(Setting setting) const {
  for (const SettingOutcome& o : settings)
    if (o.setting == setting) return o;
  throw std::out_of_range("run record has no outcome for setting " +
                          std::string(to_string(setting)));
}

namespace {

json outcome_to_json(const SettingOutcome& o) {
  json estimates = json::object(), reports = json::object();
  json est_seconds = json::object(), eval_seconds = json::object();
  for (const auto& [est, result] : o.estimates)
    estimates[std::string(to_string(est))] =
        io::frequencies_to_json(std::string(to_string(o.setting)), -1.0, result);
  for (const auto& [est, report] : o.reports)
    reports[std::string(to_string(est))] = io::report_to_json(report);
  for (const auto& [est, seconds] : o.estimate_seconds)
    est_seconds[std::string(to_string(est))] = seconds;
  for (const auto& [est, seconds] : o.evaluate_seconds)
    eval_seconds[std::string(to_string(est))] = seconds;
  return json{{"setting", std::string(to_string(o.setting))},
              {"labeled_counts", o.labeled_counts},
              {"train_est_valid_counts", o.train_est_valid_counts},
              {"dlfe_valid_counts", o.dlfe_valid_counts},
              {"train_iterations", o.train_iterations},
              {"train_epochs", o.train_epochs},
              {"estimates", estimates},
              {"reports", reports},
              {"estimate_seconds", est_seconds},
              {"evaluate_seconds", eval_seconds}};
}

SettingOutcome outcome_from_json(const json& j) {
  SettingOutcome o;
  o.setting = setting_from_string(j.at("setting").get<std::string>());
  o.labeled_counts = j.at("labeled_counts").get<std::vector<std::int64_t>>();
  o.train_est_valid_counts =
      j.at("train_est_valid_counts").get<std::vector<std::int64_t>>();
  o.dlfe_valid_counts = j.at("dlfe_valid_counts").get<std::vector<std::int64_t>>();
  o.train_iterations = j.at("train_iterations").get<int>();
  o.train_epochs = j.at("train_epochs").get<int>();
  for (const auto& [name, value] : j.at("estimates").items())
    o.estimates[estimator_from_string(name)] = io::frequencies_from_json(value);
  for (const auto& [name, value] : j.at("reports").items())
    o.reports[estimator_from_string(name)] = io::report_from_json(value);
  if (j.contains("estimate_seconds"))
    for (const auto& [name, value] : j.at("estimate_seconds").items())
      o.estimate_seconds[estimator_from_string(name)] = value.get<double>();
  if (j.contains("evaluate_seconds"))
    for (const auto& [name, value] : j.at("evaluate_seconds").items())
      o.evaluate_seconds[estimator_from_string(name)] = value.get<double>();
  return o;
}

}  // namespace

json run_record_to_json(const RunRecord& record) {
  json settings = json::array();
  for (const SettingOutcome& o : record.settings) settings.push_back(outcome_to_json(o));
  return json{{"version", record.version},
              {"config_hash", record.config_hash},
              {"gen_hash", record.gen_hash},
              {"c_true", record.c_true},
              {"metrics_k", record.metrics_k},
              {"frequency_order", record.frequency_order},
              {"settings", settings},
              {"wall_seconds", record.wall_seconds}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord record;
  record.version = j.at("version").get<std::string>();
  record.config_hash = j.at("config_hash").get<std::string>();
  record.gen_hash = j.at("gen_hash").get<std::string>();
  record.c_true = j.at("c_true").get<std::vector<double>>();
  record.metrics_k = j.at("metrics_k").get<std::vector<int>>();
  record.frequency_order = j.at("frequency_order").get<std::vector<int>>();
  for (const json& s : j.at("settings")) record.settings.push_back(outcome_from_json(s));
  record.wall_seconds = j.at("wall_seconds").get<double>();
  return record;
}

namespace {

// Tracks files written by one run so a failed run can remove them.
class OutputWriter {
 public:
  explicit OutputWriter(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& relative, const std::string& content) {
    const fs::path path = root_ / relative;
    io::atomic_write(path, content);
    written_.push_back(path);
  }

  void cleanup() noexcept {
    for (const fs::path& p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<fs::path> written_;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + std::string(name) + ": " + e.what());
  }
}

struct EvalCache {
  std::vector<EvalImage> images;
  std::vector<std::vector<ProbabilityVector>> probs;  // aligned with candidates
  GroundTruthSet gt;
};

EvalCache build_eval_cache(const Corpus& corpus, Setting setting,
                           int first_eval_image, int eval_images,
                           std::uint64_t setting_seed,
                           const ClassifierParams& params) {
  EvalCache cache;
  cache.gt = GroundTruthSet::from_scenes(
      std::span<const Scene>(corpus.scenes.data() + first_eval_image,
                             static_cast<std::size_t>(eval_images)),
      corpus.config.num_classes);
  cache.images.reserve(eval_images);
  cache.probs.reserve(eval_images);
  for (int i = 0; i < eval_images; ++i) {
    EvalImage image = eval_image(corpus, setting, first_eval_image + i, setting_seed);
    std::vector<ProbabilityVector> image_probs;
    image_probs.reserve(image.candidates.size());
    for (const TrainExample& cand : image.candidates)
      image_probs.push_back(predict(params, *cand.features));
    cache.images.push_back(std::move(image));
    cache.probs.push_back(std::move(image_probs));
  }
  return cache;
}

struct RegimeEval {
  std::vector<ImageEval> images;
  std::vector<std::vector<std::uint8_t>> hits;
};

MetricsReport evaluate_estimator(const EvalCache& cache, Estimator estimator,
                                 const LabelFrequencies* frequencies,
                                 const ExperimentConfig& cfg,
                                 std::span<const int> frequency_order,
                                 std::vector<std::vector<ScoredPrediction>>* dump) {
  const int max_k = *std::max_element(cfg.metrics_k.begin(), cfg.metrics_k.end());

  // Scores per pair, shared by both regimes.
  std::vector<std::vector<std::pair<PairKey, RecoveredScores>>> scores(cache.images.size());
  for (std::size_t i = 0; i < cache.images.size(); ++i) {
    const EvalImage& image = cache.images[i];
    scores[i].reserve(image.candidates.size());
    for (std::size_t c = 0; c < image.candidates.size(); ++c) {
      const ProbabilityVector& probs = cache.probs[i][c];
      RecoveredScores rs = estimator == Estimator::none
                               ? foreground_scores(probs)
                               : recover(probs, *frequencies, cfg.renormalize_recovered);
      scores[i].emplace_back(image.candidates[c].pair, std::move(rs));
    }
  }

  auto run_regime = [&](bool graph_constraint) {
    RegimeEval regime;
    regime.images.reserve(cache.images.size());
    for (std::size_t i = 0; i < cache.images.size(); ++i) {
      const EvalImage& image = cache.images[i];
      ImageEval ev;
      ev.ranked = rank_predictions(image.image_id, scores[i], graph_constraint, max_k);
      ev.gt = &cache.gt.triples_by_image[i];
      ev.mapping = image.identity_mapping ? nullptr : &image.det_to_gt;
      regime.hits.push_back(match_predictions(ev));
      regime.images.push_back(std::move(ev));
    }
    return regime;
  };

  MetricsReport report;
  report.ks = cfg.metrics_k;
  if (cfg.regime_constraint) {
    RegimeEval regime = run_regime(true);
    for (int k : cfg.metrics_k)
      report.constraint.push_back(recall_snapshot(regime.images, regime.hits, cache.gt,
                                                  k, frequency_order, Buckets{}));
    if (dump) {
      dump->clear();
      for (ImageEval& ev : regime.images) dump->push_back(std::move(ev.ranked));
    }
  }
  if (cfg.regime_ng) {
    RegimeEval regime = run_regime(false);
    for (int k : cfg.metrics_k)
      report.ng.push_back(recall_snapshot(regime.images, regime.hits, cache.gt, k,
                                          frequency_order, Buckets{}));
  }
  return report;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  RunRecord record;
  const json canonical = config_to_json(cfg);
  record.config_hash = config_hash(canonical);
  record.gen_hash = config_hash(io::gen_config_to_json(cfg.gen));
  record.metrics_k = cfg.metrics_k;

  // Evaluation images are extra ids after the training images, drawn from
  // the same generative process.
  GenConfig gen_all = cfg.gen;
  gen_all.num_images = cfg.gen.num_images + cfg.eval_images;
  Corpus corpus = stage("corpus", [&] {
    Corpus c = generate_corpus(gen_all);
    scar_delete(c.examples, c.c_true, rng::derive(cfg.seed, "scar"));
    return c;
  });
  record.c_true = corpus.c_true;

  std::vector<int> train_ids(cfg.gen.num_images);
  std::iota(train_ids.begin(), train_ids.end(), 0);

  // Class ids ordered by labeled frequency in the training split (buckets
  // and figure data follow this order).
  {
    std::vector<std::int64_t> labeled(corpus.config.num_classes, 0);
    for (const RelationExample& e : corpus.examples)
      if (e.image_id < cfg.gen.num_images && e.observed_label > 0)
        ++labeled[e.observed_label - 1];
    record.frequency_order.resize(corpus.config.num_classes);
    std::iota(record.frequency_order.begin(), record.frequency_order.end(), 1);
    std::stable_sort(record.frequency_order.begin(), record.frequency_order.end(),
                     [&](int a, int b) { return labeled[a - 1] > labeled[b - 1]; });
  }

  const bool want_dlfe = std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                   Estimator::dlfe) != cfg.estimators.end();
  const bool want_train_est = std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                        Estimator::train_est) != cfg.estimators.end();

  std::optional<OutputWriter> writer;
  if (!cfg.output_dir.empty()) writer.emplace(cfg.output_dir);

  try {
    json metrics_json = json::object();
    std::string metrics_csv = io::report_csv_header();

    for (Setting setting : cfg.settings) {
      const auto setting_id = static_cast<std::uint64_t>(setting);
      const std::uint64_t setting_seed = rng::derive(cfg.seed, "setting", setting_id);
      const std::string setting_name(to_string(setting));

      SettingOutcome outcome;
      outcome.setting = setting;

      SettingSource source(&corpus, setting, train_ids, setting_seed);

      // Labeled counts over the training split (corpus labels).
      outcome.labeled_counts.assign(corpus.config.num_classes, 0);
      for (const RelationExample& e : corpus.examples)
        if (e.image_id < cfg.gen.num_images && e.observed_label > 0)
          ++outcome.labeled_counts[e.observed_label - 1];

      // Train the biased model with the DLFE hook attached.
      DlfeEstimator dlfe(corpus.config.num_classes, cfg.dlfe_momentum);
      std::vector<std::pair<int, double>> batch_valid;
      BatchHook hook;
      if (want_dlfe) {
        hook = [&](const std::vector<TrainExample>& batch,
                   const std::vector<ProbabilityVector>& probs) {
          batch_valid.clear();
          for (std::size_t i = 0; i < batch.size(); ++i)
            if (batch[i].valid && batch[i].label > 0)
              batch_valid.emplace_back(batch[i].label, probs[i][batch[i].label]);
          dlfe.update(batch_valid);
        };
      }

      TrainConfig train_cfg = cfg.train;
      train_cfg.rng_seed = rng::derive(cfg.seed, "train", setting_id);
      const TrainResult trained =
          stage("train", [&] { return train_biased(source, train_cfg, hook); });
      outcome.train_iterations = trained.iterations;
      outcome.train_epochs = static_cast<int>(trained.epoch_mean_loss.size());
      outcome.dlfe_valid_counts.assign(dlfe.valid_counts().begin(),
                                       dlfe.valid_counts().end());

      // One canonical pass over the training stream: the Train-Est inputs.
      std::vector<std::vector<const std::vector<double>*>> groups(
          corpus.config.num_classes);
      stage("estimate", [&] {
        std::vector<TrainExample> scratch;
        for (int i = 0; i < source.num_images(); ++i) {
          source.image_examples(ExampleSource::kCanonicalEpoch, i, scratch);
          for (const TrainExample& e : scratch)
            if (e.valid && e.label > 0) groups[e.label - 1].push_back(e.features);
        }
        outcome.train_est_valid_counts.assign(corpus.config.num_classes, 0);
        for (std::size_t r = 0; r < groups.size(); ++r)
          outcome.train_est_valid_counts[r] =
              static_cast<std::int64_t>(groups[r].size());
        return 0;
      });

      if (want_train_est) {
        const auto e0 = std::chrono::steady_clock::now();
        outcome.estimates[Estimator::train_est] = stage("estimate", [&] {
          return train_est(
              [&](std::span<const double> x) { return predict(trained.params, x); },
              groups);
        });
        outcome.estimate_seconds[Estimator::train_est] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - e0)
                .count();
      }
      if (want_dlfe) {
        const auto e0 = std::chrono::steady_clock::now();
        outcome.estimates[Estimator::dlfe] =
            stage("estimate", [&] { return dlfe.finalize(); });
        outcome.estimate_seconds[Estimator::dlfe] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - e0)
                .count();
      }

      // Per-setting evaluation; the estimate used for a setting was produced
      // under that setting.
      const EvalCache cache = stage("evaluate", [&] {
        return build_eval_cache(corpus, setting, cfg.gen.num_images, cfg.eval_images,
                                setting_seed, trained.params);
      });

      LabelFrequencies c_true_freq{corpus.c_true};
      for (Estimator estimator : cfg.estimators) {
        const LabelFrequencies* freq = nullptr;
        switch (estimator) {
          case Estimator::none: break;
          case Estimator::ground_truth_c: freq = &c_true_freq; break;
          case Estimator::train_est:
          case Estimator::dlfe:
            freq = &outcome.estimates.at(estimator).frequencies;
            break;
        }
        std::vector<std::vector<ScoredPrediction>> dumped;
        const auto v0 = std::chrono::steady_clock::now();
        MetricsReport report = stage("evaluate", [&] {
          return evaluate_estimator(cache, estimator, freq, cfg,
                                    record.frequency_order,
                                    cfg.dump_predictions ? &dumped : nullptr);
        });
        outcome.evaluate_seconds[estimator] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - v0)
                .count();
        const std::string estimator_name(to_string(estimator));
        metrics_json[setting_name][estimator_name] = io::report_to_json(report);
        metrics_csv += io::report_csv_rows(setting_name, estimator_name, report);
        if (writer && cfg.dump_predictions)
          writer->write("predictions/" + setting_name + "." + estimator_name + ".csv",
                        io::predictions_to_csv(dumped));
        outcome.reports[estimator] = std::move(report);
      }

      if (writer) {
        for (const auto& [est, result] : outcome.estimates) {
          const double alpha = est == Estimator::dlfe ? cfg.dlfe_momentum : 0.0;
          writer->write("estimates/" + setting_name + "." +
                            std::string(to_string(est)) + ".json",
                        io::frequencies_to_json(setting_name, alpha, result).dump(2) + "\n");
        }
      }
      record.settings.push_back(std::move(outcome));
    }

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (writer) {
      writer->write("config.json", canonical.dump(2) + "\n");
      writer->write("metrics.json", metrics_json.dump(2) + "\n");
      writer->write("metrics.csv", metrics_csv);
      emit_plot_data(record, (writer->root() / "plots").string());
      // The record is written last: its presence marks a complete run.
      writer->write("run_record.json", run_record_to_json(record).dump(2) + "\n");
    }
  } catch (...) {
    if (writer) writer->cleanup();
    throw;
  }
  return record;
}

void emit_plot_data(const RunRecord& record, const std::string& dir) {
  const fs::path root(dir);
  const int num_classes = static_cast<int>(record.c_true.size());

  for (const SettingOutcome& outcome : record.settings) {
    const std::string name(to_string(outcome.setting));
    {
      // dlfe columns report the accumulated counts over all training
      // epochs; ratios can exceed 1 since one GT pair can stay valid in
      // many augmented passes.
      std::string tsv =
          "class\tlabeled\ttrain_est_valid\ttrain_est_ratio\t"
          "dlfe_valid_total\tdlfe_valid_per_epoch\tdlfe_ratio\n";
      const double epochs = std::max(1, outcome.train_epochs);
      for (int r = 1; r <= num_classes; ++r) {
        const double labeled =
            static_cast<double>(std::max<std::int64_t>(outcome.labeled_counts[r - 1], 1));
        const double te = static_cast<double>(outcome.train_est_valid_counts[r - 1]);
        const double dl = static_cast<double>(outcome.dlfe_valid_counts[r - 1]);
        tsv += std::to_string(r) + '\t' +
               std::to_string(outcome.labeled_counts[r - 1]) + '\t' +
               json(te).dump() + '\t' + json(te / labeled).dump() + '\t' +
               json(dl).dump() + '\t' + json(dl / epochs).dump() + '\t' +
               json(dl / labeled).dump() + '\n';
      }
      io::atomic_write(root / ("valid_ratio_" + name + ".tsv"), tsv);
    }

    // Per-class ng recall delta against the biased baseline at the largest K.
    const auto none_it = outcome.reports.find(Estimator::none);
    if (none_it != outcome.reports.end() && !none_it->second.ng.empty()) {
      const std::vector<double>& base =
          none_it->second.ng.back().per_class.recall;
      std::string tsv = "class";
      for (const auto& [est, report] : outcome.reports)
        tsv += '\t' + std::string(to_string(est));
      tsv += '\n';
      for (int r = 1; r <= num_classes; ++r) {
        tsv += std::to_string(r);
        for (const auto& [est, report] : outcome.reports) {
          const double delta = report.ng.empty()
                                   ? 0.0
                                   : report.ng.back().per_class.recall[r - 1] -
                                         base[r - 1];
          tsv += '\t' + json(delta).dump();
        }
        tsv += '\n';
      }
      io::atomic_write(root / ("recall_delta_" + name + ".tsv"), tsv);
    }
  }

  // Estimated label frequencies per setting per estimator.
  {
    std::string tsv = "class\tc_true";
    for (const SettingOutcome& outcome : record.settings)
      for (const auto& [est, result] : outcome.estimates)
        tsv += '\t' + std::string(to_string(outcome.setting)) + "." +
               std::string(to_string(est));
    tsv += '\n';
    for (int r = 1; r <= num_classes; ++r) {
      tsv += std::to_string(r) + '\t' + json(record.c_true[r - 1]).dump();
      for (const SettingOutcome& outcome : record.settings)
        for (const auto& [est, result] : outcome.estimates)
          tsv += '\t' + json(result.frequencies.values[r - 1]).dump();
      tsv += '\n';
    }
    io::atomic_write(root / "estimated_c.tsv", tsv);
  }
}

std::string compare_runs(std::span<const RunRecord> records) {
  if (records.empty()) throw std::invalid_argument("compare: no records");
  for (const RunRecord& r : records)
    if (r.gen_hash != records.front().gen_hash)
      throw std::invalid_argument("compare: records built from different corpora");

  const RunRecord& first = records.front();
  std::string csv = "run,estimator";
  for (const SettingOutcome& outcome : first.settings) {
    const std::string name(to_string(outcome.setting));
    for (const char* regime : {"constraint", "ng"})
      for (int k : first.metrics_k)
        csv += ',' + name + '.' + regime + ".mR@" + std::to_string(k);
  }
  csv += '\n';

  for (std::size_t i = 0; i < records.size(); ++i) {
    const RunRecord& record = records[i];
    std::vector<Estimator> estimators;
    if (!record.settings.empty())
      for (const auto& [est, report] : record.settings.front().reports)
        estimators.push_back(est);
    for (Estimator est : estimators) {
      csv += "run" + std::to_string(i) + ',' + std::string(to_string(est));
      for (const SettingOutcome& ref : first.settings) {
        const SettingOutcome& outcome = record.outcome(ref.setting);
        const auto it = outcome.reports.find(est);
        for (const char* regime : {"constraint", "ng"}) {
          const bool constraint = std::string_view(regime) == "constraint";
          for (std::size_t ki = 0; ki < first.metrics_k.size(); ++ki) {
            csv += ',';
            if (it == outcome.reports.end()) continue;
            const auto& snaps = constraint ? it->second.constraint : it->second.ng;
            if (ki < snaps.size())
              csv += json(snaps[ki].per_class.mean_recall).dump();
          }
        }
      }
      csv += '\n';
    }
  }
  return csv;
}

}  // namespace relpu
