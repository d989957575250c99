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
#include "relpu/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relpu::io {

using nlohmann::json;

namespace fs = std::filesystem;

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("io: cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("io: short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("io: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t fnv1a_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json gen_config_to_json(const GenConfig& cfg) {
  return json{{"num_classes", cfg.num_classes},
              {"feature_dim", cfg.feature_dim},
              {"class_prior", cfg.class_prior},
              {"region_centers", cfg.region_centers},
              {"background_center", cfg.background_center},
              {"region_sigma", cfg.region_sigma},
              {"label_frequencies", cfg.label_frequencies},
              {"background_fraction", cfg.background_fraction},
              {"num_images", cfg.num_images},
              {"pairs_per_image", cfg.pairs_per_image},
              {"num_object_classes", cfg.num_object_classes},
              {"detection",
               {{"miss_prob", cfg.detection.miss_prob},
                {"box_jitter_sigma", cfg.detection.box_jitter_sigma},
                {"label_error_prob", cfg.detection.label_error_prob}}},
              {"rng_seed", cfg.rng_seed}};
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig cfg;
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.class_prior = j.at("class_prior").get<std::vector<double>>();
  cfg.region_centers = j.at("region_centers").get<std::vector<std::vector<double>>>();
  cfg.background_center = j.at("background_center").get<std::vector<double>>();
  cfg.region_sigma = j.at("region_sigma").get<double>();
  cfg.label_frequencies = j.at("label_frequencies").get<std::vector<double>>();
  cfg.background_fraction = j.at("background_fraction").get<double>();
  cfg.num_images = j.at("num_images").get<int>();
  cfg.pairs_per_image = j.at("pairs_per_image").get<int>();
  cfg.num_object_classes = j.at("num_object_classes").get<int>();
  const json& det = j.at("detection");
  cfg.detection.miss_prob = det.at("miss_prob").get<double>();
  cfg.detection.box_jitter_sigma = det.at("box_jitter_sigma").get<double>();
  cfg.detection.label_error_prob = det.at("label_error_prob").get<double>();
  cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"lr_init", cfg.lr_init},
              {"warmup_iters", cfg.warmup_iters},
              {"batch_size_images", cfg.batch_size_images},
              {"bg_to_fg_ratio", cfg.bg_to_fg_ratio},
              {"max_pairs_per_image", cfg.max_pairs_per_image},
              {"max_iters", cfg.max_iters},
              {"plateau_patience", cfg.plateau_patience},
              {"max_lr_decays", cfg.max_lr_decays},
              {"lr_decay_factor", cfg.lr_decay_factor},
              {"reweight", cfg.reweight},
              {"rng_seed", cfg.rng_seed},
              {"eval_interval", cfg.eval_interval},
              {"plateau_min_delta", cfg.plateau_min_delta},
              {"holdout_fraction", cfg.holdout_fraction}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.lr_init = j.value("lr_init", cfg.lr_init);
  cfg.warmup_iters = j.value("warmup_iters", cfg.warmup_iters);
  cfg.batch_size_images = j.value("batch_size_images", cfg.batch_size_images);
  cfg.bg_to_fg_ratio = j.value("bg_to_fg_ratio", cfg.bg_to_fg_ratio);
  cfg.max_pairs_per_image = j.value("max_pairs_per_image", cfg.max_pairs_per_image);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.plateau_patience = j.value("plateau_patience", cfg.plateau_patience);
  cfg.max_lr_decays = j.value("max_lr_decays", cfg.max_lr_decays);
  cfg.lr_decay_factor = j.value("lr_decay_factor", cfg.lr_decay_factor);
  cfg.reweight = j.value("reweight", cfg.reweight);
  cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
  cfg.eval_interval = j.value("eval_interval", cfg.eval_interval);
  cfg.plateau_min_delta = j.value("plateau_min_delta", cfg.plateau_min_delta);
  cfg.holdout_fraction = j.value("holdout_fraction", cfg.holdout_fraction);
  return cfg;
}

namespace {

std::string corpus_records(const Corpus& corpus) {
  std::string out;
  for (const RelationExample& e : corpus.examples) {
    json rec{{"image_id", e.image_id},
             {"pair", {e.pair.subject, e.pair.object}},
             {"x", e.features},
             {"s", e.observed_label},
             {"y", e.true_class}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string scene_records(const Corpus& corpus) {
  std::string out;
  for (const Scene& scene : corpus.scenes) {
    json objs = json::array();
    for (const SceneObject& obj : scene.objects) {
      objs.push_back(json{{"box", {obj.box.x1, obj.box.y1, obj.box.x2, obj.box.y2}},
                          {"cls", obj.object_class}});
    }
    json rels = json::array();
    for (const GtRelation& rel : scene.relations)
      rels.push_back({rel.subject, rel.object, rel.predicate});
    json rec{{"image_id", scene.image_id}, {"objects", objs}, {"relations", rels}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string examples = corpus_records(corpus);
  const std::string scenes = scene_records(corpus);
  json manifest{{"config", gen_config_to_json(corpus.config)},
                {"c_true", corpus.c_true},
                {"num_examples", corpus.examples.size()},
                {"num_scenes", corpus.scenes.size()},
                {"checksum", fnv1a_bytes(examples + scenes)}};
  atomic_write(dir / "examples.jsonl", examples);
  atomic_write(dir / "scenes.jsonl", scenes);
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus read_corpus(const fs::path& dir) {
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  const std::string examples = read_file(dir / "examples.jsonl");
  const std::string scenes = read_file(dir / "scenes.jsonl");
  if (fnv1a_bytes(examples + scenes) != manifest.at("checksum").get<std::uint64_t>())
    throw std::runtime_error("corpus: checksum mismatch in " + dir.string());

  Corpus corpus;
  corpus.config = gen_config_from_json(manifest.at("config"));
  corpus.c_true = manifest.at("c_true").get<std::vector<double>>();

  std::istringstream ex_in(examples);
  std::string line;
  while (std::getline(ex_in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    RelationExample e;
    e.image_id = rec.at("image_id").get<int>();
    e.pair.subject = rec.at("pair")[0].get<int>();
    e.pair.object = rec.at("pair")[1].get<int>();
    e.features = rec.at("x").get<std::vector<double>>();
    e.observed_label = rec.at("s").get<int>();
    e.true_class = rec.at("y").get<int>();
    corpus.examples.push_back(std::move(e));
  }

  std::istringstream sc_in(scenes);
  while (std::getline(sc_in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    Scene scene;
    scene.image_id = rec.at("image_id").get<int>();
    for (const json& jo : rec.at("objects")) {
      SceneObject obj;
      obj.box.x1 = jo.at("box")[0].get<double>();
      obj.box.y1 = jo.at("box")[1].get<double>();
      obj.box.x2 = jo.at("box")[2].get<double>();
      obj.box.y2 = jo.at("box")[3].get<double>();
      obj.object_class = jo.at("cls").get<int>();
      scene.objects.push_back(obj);
    }
    for (const json& jr : rec.at("relations"))
      scene.relations.push_back(
          GtRelation{jr[0].get<int>(), jr[1].get<int>(), jr[2].get<int>()});
    corpus.scenes.push_back(std::move(scene));
  }

  if (corpus.examples.size() != manifest.at("num_examples").get<std::size_t>() ||
      corpus.scenes.size() != manifest.at("num_scenes").get<std::size_t>())
    throw std::runtime_error("corpus: record count mismatch in " + dir.string());
  return corpus;
}

void write_params(const ClassifierParams& params, const TrainConfig& schedule,
                  const fs::path& dir) {
  static_assert(std::endian::native == std::endian::little,
                "weight blob is little-endian");
  fs::create_directories(dir);
  json meta{{"num_classes", params.num_classes()},
            {"feature_dim", params.feature_dim()},
            {"layout", "row_major_f64"},
            {"schedule", train_config_to_json(schedule)}};
  atomic_write(dir / "params.json", meta.dump(2) + "\n");
  std::string blob(params.raw().size() * sizeof(double), '\0');
  std::memcpy(blob.data(), params.raw().data(), blob.size());
  atomic_write(dir / "weights.f64", blob);
}

ClassifierParams read_params(const fs::path& dir) {
  const json meta = json::parse(read_file(dir / "params.json"));
  ClassifierParams params(meta.at("num_classes").get<int>(),
                          meta.at("feature_dim").get<int>());
  const std::string blob = read_file(dir / "weights.f64");
  if (blob.size() != params.raw().size() * sizeof(double))
    throw std::runtime_error("params: weight blob size mismatch in " + dir.string());
  std::memcpy(params.raw().data(), blob.data(), blob.size());
  if (!params.finite()) throw std::runtime_error("params: non-finite weights");
  return params;
}

json frequencies_to_json(const std::string& setting, double alpha,
                         const EstimateResult& estimate) {
  json j{{"setting", setting},
         {"c", estimate.frequencies.values},
         {"missing", estimate.missing_classes},
         {"valid_counts", estimate.valid_counts}};
  j["alpha"] = alpha;
  return j;
}

EstimateResult frequencies_from_json(const json& j, std::string* setting,
                                     double* alpha) {
  EstimateResult estimate;
  estimate.frequencies.values = j.at("c").get<std::vector<double>>();
  estimate.missing_classes = j.at("missing").get<std::vector<int>>();
  estimate.valid_counts = j.at("valid_counts").get<std::vector<std::int64_t>>();
  if (setting) *setting = j.at("setting").get<std::string>();
  if (alpha) *alpha = j.at("alpha").get<double>();
  return estimate;
}

std::string predictions_to_csv(const std::vector<std::vector<ScoredPrediction>>& by_image) {
  std::string out = "image_id,subject_idx,object_idx,predicate,score,rank\n";
  for (const auto& image : by_image) {
    for (std::size_t rank = 0; rank < image.size(); ++rank) {
      const ScoredPrediction& p = image[rank];
      out += std::to_string(p.image_id) + ',' + std::to_string(p.pair.subject) +
             ',' + std::to_string(p.pair.object) + ',' +
             std::to_string(p.predicate) + ',' + json(p.score).dump() + ',' +
             std::to_string(rank + 1) + '\n';
    }
  }
  return out;
}

json snapshot_to_json(const RecallSnapshot& snap) {
  json j;
  if (snap.recall)
    j["recall"] = *snap.recall;
  else
    j["recall"] = nullptr;
  j["mean_recall"] = snap.per_class.mean_recall;
  j["per_class"] = snap.per_class.recall;
  j["present"] = snap.per_class.present;
  j["head"] = snap.buckets.recall[0];
  j["middle"] = snap.buckets.recall[1];
  j["tail"] = snap.buckets.recall[2];
  j["bucket_class_counts"] = snap.buckets.class_counts;
  j["bucket_gt_counts"] = snap.buckets.gt_counts;
  return j;
}

namespace {

RecallSnapshot snapshot_from_json(const json& j) {
  RecallSnapshot snap;
  if (!j.at("recall").is_null()) snap.recall = j.at("recall").get<double>();
  snap.per_class.mean_recall = j.at("mean_recall").get<double>();
  snap.per_class.recall = j.at("per_class").get<std::vector<double>>();
  snap.per_class.present = j.at("present").get<std::vector<std::uint8_t>>();
  snap.buckets.recall = {j.at("head").get<double>(), j.at("middle").get<double>(),
                         j.at("tail").get<double>()};
  const auto cc = j.at("bucket_class_counts").get<std::vector<int>>();
  const auto gc = j.at("bucket_gt_counts").get<std::vector<std::int64_t>>();
  for (int b = 0; b < 3; ++b) {
    snap.buckets.class_counts[b] = cc[b];
    snap.buckets.gt_counts[b] = gc[b];
  }
  return snap;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
  json j{{"ks", report.ks}};
  json constraint = json::array(), ng = json::array();
  for (const RecallSnapshot& s : report.constraint) constraint.push_back(snapshot_to_json(s));
  for (const RecallSnapshot& s : report.ng) ng.push_back(snapshot_to_json(s));
  j["constraint"] = constraint;
  j["ng"] = ng;
  return j;
}

MetricsReport report_from_json(const json& j) {
  MetricsReport report;
  report.ks = j.at("ks").get<std::vector<int>>();
  for (const json& s : j.at("constraint")) report.constraint.push_back(snapshot_from_json(s));
  for (const json& s : j.at("ng")) report.ng.push_back(snapshot_from_json(s));
  return report;
}

std::string report_csv_header() {
  return "setting,estimator,regime,k,recall,mean_recall,head,middle,tail\n";
}

namespace {

void append_csv_rows(std::string& out, const std::string& setting,
                     const std::string& estimator, const char* regime,
                     const std::vector<int>& ks,
                     const std::vector<RecallSnapshot>& snaps) {
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const RecallSnapshot& s = snaps[i];
    out += setting + ',' + estimator + ',' + regime + ',' + std::to_string(ks[i]) +
           ',' + (s.recall ? json(*s.recall).dump() : std::string()) + ',' +
           json(s.per_class.mean_recall).dump() + ',' +
           json(s.buckets.recall[0]).dump() + ',' + json(s.buckets.recall[1]).dump() +
           ',' + json(s.buckets.recall[2]).dump() + '\n';
  }
}

}  // namespace

std::string report_csv_rows(const std::string& setting, const std::string& estimator,
                            const MetricsReport& report) {
  std::string out;
  append_csv_rows(out, setting, estimator, "constraint", report.ks, report.constraint);
  append_csv_rows(out, setting, estimator, "ng", report.ks, report.ng);
  return out;
}

}  // namespace relpu::io
