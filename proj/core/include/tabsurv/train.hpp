#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabsurv/dataset.hpp"
#include "tabsurv/metrics.hpp"
#include "tabsurv/model.hpp"
#include "tabsurv/survhl.hpp"

namespace tabsurv {

struct TrainConfig {
  ModelConfig model;
  int r = 3;                    // SurvHL smoothing radius
  double learning_rate = 1e-3;  // Adam alpha
  int batch_size = 64;
  double grid_fraction = 1.0;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double val_cindex = 0.0;
};

struct ModelBundle {
  int version = 1;
  TrainConfig cfg;
  TableSchema schema;  // column roles, so eval can parse raw CSVs on its own
  PreprocessingRecord record;
  TimeGrid grid;
  EnsembleModel model;
  StepFunction censoring_km;  // fitted on the training split, used for IPCW at eval
};

/// Mini-batch SurvHL training with Adam and validation C-index early stopping.
/// Best-epoch parameters are restored before returning.
ModelBundle train(const SurvivalDataset& train_set, const SurvivalDataset& val_set,
                  const TrainConfig& cfg, std::vector<TrainLogEntry>* log = nullptr);

MetricReport evaluate(const ModelBundle& bundle, const SurvivalDataset& test_set,
                      bool with_ks = false);

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

nlohmann::json metric_report_to_json(const MetricReport& report);

// -- experiment runner -------------------------------------------------------

struct ExperimentModel {
  std::string name;
  TrainConfig config;
};

struct ExperimentPlan {
  std::string csv_path;
  std::string schema_path;
  SplitSpec split;
  std::vector<ExperimentModel> models;
  int n_runs = 20;
  std::uint64_t base_seed = 0;
  std::string output_dir;
  bool merge_validation_into_train = false;  // stage-2 RSF-style mode; off for TabSurv heads

  static ExperimentPlan from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Runs every (model, seed) pair, aggregates mean/std and ranks, writes
/// aggregated.json, table.csv and per-run reports under plan.output_dir.
/// Returns the aggregated JSON document.
nlohmann::json run_experiment(const ExperimentPlan& plan);

/// Uniform (log-uniform for rates) random search over a JSON-described domain,
/// selecting the configuration with the best validation C-index.
TrainConfig random_search(const nlohmann::json& space, int budget,
                          const SurvivalDataset& train_set, const SurvivalDataset& val_set,
                          std::uint64_t seed);

/// Draws one configuration from the search space (exposed for tests).
TrainConfig sample_config(const nlohmann::json& space, std::mt19937_64& rng);

}  // namespace tabsurv
