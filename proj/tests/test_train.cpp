#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tabsurv/simulation.hpp"
#include "tabsurv/train.hpp"

using namespace tabsurv;

namespace {

PreprocessingRecord gaussian_record(std::size_t d) {
  PreprocessingRecord rec;
  for (std::size_t j = 0; j < d; ++j) {
    rec.layout.push_back({ColumnKind::Numeric, j});
    rec.numeric_stats.push_back({"x" + std::to_string(j), 0.0, 1.0});
  }
  return rec;
}

SurvivalDataset toy_dataset(std::size_t n, std::uint64_t seed) {
  // event time = exp(linear score), no censoring: cleanly learnable
  SurvivalDataset ds;
  ds.features = gaussian_features(n, 2, seed);
  ds.record = gaussian_record(2);
  ds.times.resize(n);
  ds.events.assign(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    ds.times[i] = std::exp(0.8 * ds.features(i, 0) - 0.5 * ds.features(i, 1));
  return ds;
}

TrainConfig small_config(HeadKind head) {
  TrainConfig cfg;
  cfg.model.head = head;
  cfg.model.blocks = 2;
  cfg.model.hidden = 16;
  cfg.model.ensemble = head == HeadKind::LS ? 1 : 2;
  cfg.model.emb_bins = 8;
  cfg.model.emb_dim = 4;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 64;
  cfg.max_epochs = 30;
  cfg.patience = 8;
  cfg.seed = 5;
  return cfg;
}

std::string write_sim_csv(std::size_t n, std::uint64_t seed) {
  Matrix x = gaussian_features(n, 4, seed);
  SimConfig sim_cfg;
  sim_cfg.seed = seed;
  SimulatedDataset sim = generate(x, sim_cfg);
  std::string path = "tabsurv_train_test_" + std::to_string(seed) + ".csv";
  std::ofstream out(path);
  out.precision(17);
  out << "a,b,c,d,time,event\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 4; ++j) out << x(i, j) << ",";
    out << sim.times[i] << "," << sim.events[i] << "\n";
  }
  return path;
}

const char* kSimSchema =
    R"({"time":"time","event":"event","numeric":["a","b","c","d"],"categorical":[]})";

}  // namespace

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg = small_config(HeadKind::LS);
  CHECK_NOTHROW(cfg.validate());
  TrainConfig bad = cfg;
  bad.model.ensemble = 4;  // LS forces 1
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.r = 6;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.model.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.grid_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  // JSON round trip
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("train learns a separable toy problem") {
  SurvivalDataset train_set = toy_dataset(500, 1);
  SurvivalDataset val_set = toy_dataset(100, 2);
  TrainConfig cfg = small_config(HeadKind::LS);
  cfg.max_epochs = 60;
  std::vector<TrainLogEntry> log;
  ModelBundle bundle = train(train_set, val_set, cfg, &log);
  CHECK_FALSE(log.empty());
  MetricReport on_train = evaluate(bundle, train_set);
  CHECK(on_train.c_index > 0.9);
}

TEST_CASE("patience 0 stops at the first non-improving epoch") {
  SurvivalDataset train_set = toy_dataset(200, 3);
  SurvivalDataset val_set = toy_dataset(60, 4);
  TrainConfig cfg = small_config(HeadKind::LS);
  cfg.max_epochs = 200;
  cfg.patience = 0;
  std::vector<TrainLogEntry> log;
  train(train_set, val_set, cfg, &log);
  REQUIRE(log.size() >= 2);
  CHECK(log.size() < 200);
  // the run ends exactly one epoch after the last improvement
  double best = -1.0;
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    CHECK(log[i].val_cindex > best);  // every earlier epoch improved
    best = std::max(best, log[i].val_cindex);
  }
  CHECK(log.back().val_cindex <= best);
}

TEST_CASE("training is deterministic given the seed") {
  SurvivalDataset train_set = toy_dataset(150, 7);
  SurvivalDataset val_set = toy_dataset(50, 8);
  TrainConfig cfg = small_config(HeadKind::LAS);
  cfg.max_epochs = 8;
  ModelBundle a = train(train_set, val_set, cfg);
  ModelBundle b = train(train_set, val_set, cfg);
  for (const auto& [name, p] : a.model.params().entries()) {
    const auto& q = b.model.params().at(name);
    for (std::size_t i = 0; i < p.value.size(); ++i)
      CHECK(p.value.data()[i] == q.value.data()[i]);
  }
}

TEST_CASE("evaluate is repeatable and read-only") {
  SurvivalDataset train_set = toy_dataset(150, 9);
  SurvivalDataset val_set = toy_dataset(50, 10);
  TrainConfig cfg = small_config(HeadKind::WAS);
  cfg.max_epochs = 6;
  ModelBundle bundle = train(train_set, val_set, cfg);
  MetricReport r1 = evaluate(bundle, val_set, true);
  MetricReport r2 = evaluate(bundle, val_set, true);
  CHECK(r1.c_index == r2.c_index);
  CHECK(r1.ibs == r2.ibs);
  CHECK(r1.integrated_auc == r2.integrated_auc);
  REQUIRE(r1.ks.has_value());
  CHECK(*r1.ks == *r2.ks);
  CHECK(r1.c_index >= 0.0);
  CHECK(r1.c_index <= 1.0);
  CHECK(r1.ibs >= 0.0);

  nlohmann::json j = metric_report_to_json(r1);
  CHECK(j.contains("c_index"));
  CHECK(j.contains("ibs"));
  CHECK(j.contains("integrated_auc"));
  CHECK(j.contains("ks"));

  SurvivalDataset wrong = toy_dataset(10, 11);
  wrong.features = gaussian_features(10, 5, 1);
  CHECK_THROWS_AS(evaluate(bundle, wrong), ValidationError);
}

TEST_CASE("bundle round trip is bit exact") {
  SurvivalDataset train_set = toy_dataset(150, 12);
  SurvivalDataset val_set = toy_dataset(50, 13);
  for (HeadKind head : {HeadKind::LS, HeadKind::WSA}) {
    TrainConfig cfg = small_config(head);
    cfg.max_epochs = 5;
    ModelBundle bundle = train(train_set, val_set, cfg);
    std::string path = "tabsurv_bundle_test.json";
    save_bundle(bundle, path);
    ModelBundle loaded = load_bundle(path);
    for (const auto& [name, p] : bundle.model.params().entries()) {
      const auto& q = loaded.model.params().at(name);
      REQUIRE(p.value.size() == q.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i)
        CHECK(p.value.data()[i] == q.value.data()[i]);
    }
    CHECK(loaded.grid.taus == bundle.grid.taus);
    // identical predictions on a fixed batch
    auto before = bundle.model.predict(val_set.features, bundle.grid);
    auto after = loaded.model.predict(val_set.features, loaded.grid);
    for (std::size_t i = 0; i < before.size(); ++i)
      for (std::size_t j = 0; j < before[i].probs.size(); ++j)
        CHECK(before[i].probs[j] == after[i].probs[j]);
    std::remove(path.c_str());
  }
}

TEST_CASE("bundle load rejects corrupt and future-version files") {
  SurvivalDataset train_set = toy_dataset(150, 14);
  SurvivalDataset val_set = toy_dataset(50, 15);
  TrainConfig cfg = small_config(HeadKind::LS);
  cfg.max_epochs = 3;
  ModelBundle bundle = train(train_set, val_set, cfg);
  std::string path = "tabsurv_bundle_corrupt.json";
  save_bundle(bundle, path);

  // truncated file
  {
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path);
    out << content.substr(0, content.size() / 2);
  }
  CHECK_THROWS_AS(load_bundle(path), ParseError);

  // future version tag
  save_bundle(bundle, path);
  {
    std::ifstream in(path);
    nlohmann::json doc;
    in >> doc;
    doc["version"] = 999;
    std::ofstream out(path);
    out << doc.dump();
  }
  CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("version"), ParseError);

  CHECK_THROWS_AS(load_bundle("missing_bundle.json"), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("run_experiment writes reports and aggregates") {
  std::string csv = write_sim_csv(400, 77);
  std::string schema_path = "tabsurv_exp_schema.json";
  {
    std::ofstream out(schema_path);
    out << kSimSchema;
  }
  ExperimentPlan plan;
  plan.csv_path = csv;
  plan.schema_path = schema_path;
  plan.n_runs = 1;
  plan.base_seed = 3;
  plan.output_dir = "tabsurv_exp_out";
  TrainConfig cfg = small_config(HeadKind::LS);
  cfg.max_epochs = 5;
  plan.models.push_back({"ls_small", cfg});

  nlohmann::json agg = run_experiment(plan);
  REQUIRE(agg["models"].size() == 1);
  CHECK(agg["models"][0]["name"] == "ls_small");
  CHECK(agg["models"][0]["c_index"]["rank_mean"] == 1.0);
  CHECK(agg["models"][0]["c_index"]["per_seed"].size() == 1);

  // run report and table files exist; table header matches the schema
  CHECK(std::filesystem::exists("tabsurv_exp_out/ls_small_run0.json"));
  CHECK(std::filesystem::exists("tabsurv_exp_out/aggregated.json"));
  std::ifstream table("tabsurv_exp_out/table.csv");
  std::string header;
  std::getline(table, header);
  CHECK(header ==
        "model,cindex_mean,cindex_std,cindex_rank,cindex_rank_std,"
        "ibs_mean,ibs_std,ibs_rank,ibs_rank_std,"
        "auc_mean,auc_std,auc_rank,auc_rank_std");

  // plan JSON round trip
  ExperimentPlan back = ExperimentPlan::from_json(plan.to_json());
  CHECK(back.to_json() == plan.to_json());

  std::filesystem::remove_all("tabsurv_exp_out");
  std::remove(csv.c_str());
  std::remove(schema_path.c_str());
}

TEST_CASE("sample_config draws log-uniform learning rates") {
  nlohmann::json space = {
      {"head", "ls"},          {"blocks", {1, 2}},
      {"hidden", {16, 32}},    {"ensemble", {1}},
      {"emb_bins", {8}},       {"emb_dim", {4}},
      {"batch_size", {32, 64}},
      {"r", {1, 2, 3, 4, 5}},
      {"learning_rate", {{"log_uniform", {1e-4, 5e-3}}}},
      {"max_epochs", 10},      {"patience", 3},
  };
  std::mt19937_64 rng(1);
  std::vector<double> lrs;
  for (int i = 0; i < 10000; ++i) {
    TrainConfig cfg = sample_config(space, rng);
    CHECK(cfg.learning_rate >= 1e-4);
    CHECK(cfg.learning_rate <= 5e-3);
    CHECK((cfg.model.blocks == 1 || cfg.model.blocks == 2));
    lrs.push_back(std::log(cfg.learning_rate));
  }
  std::sort(lrs.begin(), lrs.end());
  double lo = std::log(1e-4), hi = std::log(5e-3);
  for (int d = 1; d <= 9; ++d) {
    double q = lrs[static_cast<std::size_t>(d / 10.0 * (lrs.size() - 1))];
    double expected = lo + d / 10.0 * (hi - lo);
    CHECK(std::fabs((q - expected) / (hi - lo)) < 0.02);
  }
}

TEST_CASE("random_search returns the best of its trials") {
  SurvivalDataset train_set = toy_dataset(150, 20);
  SurvivalDataset val_set = toy_dataset(60, 21);
  nlohmann::json space = {
      {"head", "ls"},       {"blocks", {1, 2}},     {"hidden", {8, 16}},
      {"ensemble", {1}},    {"emb_bins", {8}},      {"emb_dim", {4}},
      {"batch_size", {64}}, {"r", {1, 3}},
      {"learning_rate", {{"log_uniform", {1e-3, 5e-3}}}},
      {"max_epochs", 5},    {"patience", 2},
  };
  TrainConfig best = random_search(space, 3, train_set, val_set, 17);
  CHECK_NOTHROW(best.validate());
  // determinism of the search itself
  TrainConfig again = random_search(space, 3, train_set, val_set, 17);
  CHECK(best.to_json() == again.to_json());

  CHECK_THROWS_AS(random_search(space, 0, train_set, val_set, 17), ValidationError);
}
