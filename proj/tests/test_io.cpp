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
#include <random>

#include "relpu/io.hpp"

using namespace relpu;
namespace fs = std::filesystem;

namespace {

Corpus small_corpus(std::uint64_t seed) {
  GenConfig cfg;
  cfg.num_classes = 3;
  cfg.feature_dim = 2;
  cfg.class_prior = geometric_prior(3, 0.5);
  cfg.label_frequencies = {0.9, 0.5, 0.2};
  cfg.background_fraction = 0.4;
  cfg.num_images = 12;
  cfg.pairs_per_image = 12;
  cfg.rng_seed = seed;
  assign_grid_centers(cfg);
  Corpus corpus = generate_corpus(cfg);
  scar_delete(corpus.examples, corpus.c_true, seed + 1);
  return corpus;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("corpus round-trips exactly") {
  const Corpus corpus = small_corpus(42);
  const fs::path dir = temp_dir("relpu_io_corpus");
  io::write_corpus(corpus, dir);
  const Corpus loaded = io::read_corpus(dir);

  REQUIRE(loaded.examples.size() == corpus.examples.size());
  REQUIRE(loaded.scenes.size() == corpus.scenes.size());
  CHECK(loaded.c_true == corpus.c_true);
  CHECK(loaded.config.class_prior == corpus.config.class_prior);
  CHECK(loaded.config.region_centers == corpus.config.region_centers);
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const RelationExample& a = corpus.examples[i];
    const RelationExample& b = loaded.examples[i];
    CHECK(a.image_id == b.image_id);
    CHECK(a.pair == b.pair);
    CHECK(a.observed_label == b.observed_label);
    CHECK(a.true_class == b.true_class);
    REQUIRE(a.features.size() == b.features.size());
    for (std::size_t j = 0; j < a.features.size(); ++j)
      CHECK(a.features[j] == b.features[j]);  // bit-exact float round-trip
  }
  for (std::size_t i = 0; i < corpus.scenes.size(); ++i) {
    const Scene& a = corpus.scenes[i];
    const Scene& b = loaded.scenes[i];
    REQUIRE(a.objects.size() == b.objects.size());
    for (std::size_t o = 0; o < a.objects.size(); ++o) {
      CHECK(a.objects[o].box.x1 == b.objects[o].box.x1);
      CHECK(a.objects[o].box.y2 == b.objects[o].box.y2);
      CHECK(a.objects[o].object_class == b.objects[o].object_class);
    }
    REQUIRE(a.relations.size() == b.relations.size());
  }
}

TEST_CASE("corpus reader rejects tampered records") {
  const Corpus corpus = small_corpus(7);
  const fs::path dir = temp_dir("relpu_io_tamper");
  io::write_corpus(corpus, dir);
  std::string examples = io::read_file(dir / "examples.jsonl");
  examples[examples.find("\"s\"") + 4] = ' ';
  io::atomic_write(dir / "examples.jsonl", examples);
  CHECK_THROWS(io::read_corpus(dir));
}

TEST_CASE("classifier params round-trip bit-exactly") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> gauss(0.0, 3.0);
  ClassifierParams params(4, 6);
  for (double& w : params.raw()) w = gauss(gen);
  const fs::path dir = temp_dir("relpu_io_params");
  io::write_params(params, TrainConfig{}, dir);
  const ClassifierParams loaded = io::read_params(dir);
  REQUIRE(loaded.num_classes() == 4);
  REQUIRE(loaded.feature_dim() == 6);
  for (std::size_t i = 0; i < params.raw().size(); ++i)
    CHECK(params.raw()[i] == loaded.raw()[i]);
}

TEST_CASE("frequencies serialize with the documented schema") {
  EstimateResult estimate;
  estimate.frequencies.values = {0.9, 0.45, 0.0001};
  estimate.missing_classes = {3};
  estimate.valid_counts = {120, 40, 0};
  const nlohmann::json j = io::frequencies_to_json("sgdet", 0.1, estimate);
  CHECK(j.at("setting") == "sgdet");
  CHECK(j.at("alpha") == 0.1);
  CHECK(j.at("c").size() == 3);
  CHECK(j.at("missing") == nlohmann::json::array({3}));
  CHECK(j.at("valid_counts").size() == 3);

  std::string setting;
  double alpha = 0;
  const EstimateResult back = io::frequencies_from_json(j, &setting, &alpha);
  CHECK(setting == "sgdet");
  CHECK(alpha == 0.1);
  CHECK(back.frequencies.values == estimate.frequencies.values);
  CHECK(back.missing_classes == estimate.missing_classes);
  CHECK(back.valid_counts == estimate.valid_counts);
}

TEST_CASE("prediction dumps carry rank and pair columns") {
  std::vector<std::vector<ScoredPrediction>> preds{
      {ScoredPrediction{0, PairKey{1, 2}, 3, 0.75},
       ScoredPrediction{0, PairKey{2, 1}, 1, 0.5}},
      {ScoredPrediction{1, PairKey{0, 1}, 2, 1.25}}};
  const std::string csv = io::predictions_to_csv(preds);
  CHECK(csv.find("image_id,subject_idx,object_idx,predicate,score,rank\n") == 0);
  CHECK(csv.find("0,1,2,3,0.75,1\n") != std::string::npos);
  CHECK(csv.find("0,2,1,1,0.5,2\n") != std::string::npos);
  CHECK(csv.find("1,0,1,2,1.25,1\n") != std::string::npos);
}

TEST_CASE("metrics reports round-trip through json") {
  MetricsReport report;
  report.ks = {20, 50};
  RecallSnapshot snap;
  snap.recall = 0.5;
  snap.per_class.recall = {1.0, 0.25, 0.0};
  snap.per_class.present = {1, 1, 0};
  snap.per_class.mean_recall = 0.625;
  snap.buckets.recall = {1.0, 0.25, 0.0};
  snap.buckets.class_counts = {1, 1, 0};
  snap.buckets.gt_counts = {4, 4, 0};
  report.constraint = {snap, snap};
  RecallSnapshot undefined = snap;
  undefined.recall.reset();
  report.ng = {undefined, snap};

  const MetricsReport back = io::report_from_json(io::report_to_json(report));
  CHECK(back.ks == report.ks);
  REQUIRE(back.constraint.size() == 2);
  REQUIRE(back.ng.size() == 2);
  CHECK(back.constraint[0].recall == 0.5);
  CHECK(!back.ng[0].recall.has_value());
  CHECK(back.ng[1].per_class.recall == snap.per_class.recall);
  CHECK(back.constraint[1].buckets.gt_counts == snap.buckets.gt_counts);

  const std::string csv = io::report_csv_header() +
                          io::report_csv_rows("predcls", "dlfe", report);
  CHECK(csv.find("predcls,dlfe,constraint,20,0.5,0.625,1.0,0.25,0.0\n") !=
        std::string::npos);
  CHECK(csv.find("predcls,dlfe,ng,20,,0.625") != std::string::npos);
}
