#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tabsurv/train.hpp"

namespace tabsurv {

namespace {

nlohmann::json split_to_json(const SplitSpec& s) {
  return {{"train_fraction", s.train_fraction},
          {"validation_fraction", s.validation_fraction},
          {"test_fraction", s.test_fraction},
          {"seed", s.seed}};
}

SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.validation_fraction = j.value("validation_fraction", s.validation_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  return s;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

SurvivalDataset concat(const SurvivalDataset& a, const SurvivalDataset& b) {
  SurvivalDataset out = a;
  out.features = Matrix(a.n() + b.n(), a.features.cols());
  std::copy(a.features.data().begin(), a.features.data().end(), out.features.data().begin());
  std::copy(b.features.data().begin(), b.features.data().end(),
            out.features.data().begin() + static_cast<long>(a.features.size()));
  out.times.insert(out.times.end(), b.times.begin(), b.times.end());
  out.events.insert(out.events.end(), b.events.begin(), b.events.end());
  return out;
}

}  // namespace

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& j) {
  ExperimentPlan plan;
  plan.csv_path = j.at("data").get<std::string>();
  plan.schema_path = j.at("schema").get<std::string>();
  if (j.contains("split")) plan.split = split_from_json(j.at("split"));
  for (const auto& m : j.at("models")) {
    ExperimentModel em;
    em.name = m.at("name").get<std::string>();
    em.config = TrainConfig::from_json(m.at("config"));
    plan.models.push_back(std::move(em));
  }
  plan.n_runs = j.value("n_runs", plan.n_runs);
  plan.base_seed = j.value("base_seed", plan.base_seed);
  plan.output_dir = j.value("output_dir", std::string("experiment_out"));
  plan.merge_validation_into_train =
      j.value("merge_validation_into_train", plan.merge_validation_into_train);
  if (plan.models.empty()) throw ValidationError("experiment: no models in plan");
  if (plan.n_runs < 1) throw ValidationError("experiment: n_runs must be >= 1");
  return plan;
}

nlohmann::json ExperimentPlan::to_json() const {
  nlohmann::json models_j = nlohmann::json::array();
  for (const auto& m : models)
    models_j.push_back({{"name", m.name}, {"config", m.config.to_json()}});
  return {{"data", csv_path},
          {"schema", schema_path},
          {"split", split_to_json(split)},
          {"models", models_j},
          {"n_runs", n_runs},
          {"base_seed", base_seed},
          {"output_dir", output_dir},
          {"merge_validation_into_train", merge_validation_into_train}};
}

nlohmann::json run_experiment(const ExperimentPlan& plan) {
  TableSchema schema = TableSchema::from_json_file(plan.schema_path);
  RawTable raw = load_csv(plan.csv_path, schema);
  SurvivalDataset data = preprocess(raw);
  SplitResult split = stratified_split(data, plan.split);
  SurvivalDataset train_set =
      plan.merge_validation_into_train ? concat(split.train, split.validation) : split.train;

  std::filesystem::create_directories(plan.output_dir);

  const std::size_t n_models = plan.models.size();
  const std::size_t n_runs = static_cast<std::size_t>(plan.n_runs);
  std::vector<std::vector<double>> cindex(n_models), ibs(n_models), auc(n_models);

  for (std::size_t mi = 0; mi < n_models; ++mi) {
    const ExperimentModel& em = plan.models[mi];
    for (std::size_t r = 0; r < n_runs; ++r) {
      TrainConfig cfg = em.config;
      cfg.seed = plan.base_seed + r;
      ModelBundle bundle = train(train_set, split.validation, cfg);
      MetricReport report = evaluate(bundle, split.test);
      cindex[mi].push_back(report.c_index);
      ibs[mi].push_back(report.ibs);
      auc[mi].push_back(report.integrated_auc);

      nlohmann::json run_doc = metric_report_to_json(report);
      run_doc["model"] = em.name;
      run_doc["seed"] = cfg.seed;
      std::ofstream run_out(std::filesystem::path(plan.output_dir) /
                            (em.name + "_run" + std::to_string(r) + ".json"));
      run_out << run_doc.dump(2) << "\n";
    }
  }

  std::vector<RankSummary> c_ranks = rank_models(cindex, true);
  std::vector<RankSummary> ibs_ranks = rank_models(ibs, false);
  std::vector<RankSummary> auc_ranks = rank_models(auc, true);

  nlohmann::json models_j = nlohmann::json::array();
  for (std::size_t mi = 0; mi < n_models; ++mi) {
    models_j.push_back({{"name", plan.models[mi].name},
                        {"c_index",
                         {{"mean", mean_of(cindex[mi])},
                          {"std", std_of(cindex[mi])},
                          {"rank_mean", c_ranks[mi].mean},
                          {"rank_std", c_ranks[mi].std},
                          {"per_seed", cindex[mi]}}},
                        {"ibs",
                         {{"mean", mean_of(ibs[mi])},
                          {"std", std_of(ibs[mi])},
                          {"rank_mean", ibs_ranks[mi].mean},
                          {"rank_std", ibs_ranks[mi].std},
                          {"per_seed", ibs[mi]}}},
                        {"integrated_auc",
                         {{"mean", mean_of(auc[mi])},
                          {"std", std_of(auc[mi])},
                          {"rank_mean", auc_ranks[mi].mean},
                          {"rank_std", auc_ranks[mi].std},
                          {"per_seed", auc[mi]}}}});
  }
  nlohmann::json aggregated = {{"base_seed", plan.base_seed},
                               {"n_runs", plan.n_runs},
                               {"models", models_j}};

  {
    std::ofstream out(std::filesystem::path(plan.output_dir) / "aggregated.json");
    out << aggregated.dump(2) << "\n";
  }
  {
    std::ofstream out(std::filesystem::path(plan.output_dir) / "table.csv");
    out << "model,cindex_mean,cindex_std,cindex_rank,cindex_rank_std,"
           "ibs_mean,ibs_std,ibs_rank,ibs_rank_std,"
           "auc_mean,auc_std,auc_rank,auc_rank_std\n";
    for (std::size_t mi = 0; mi < n_models; ++mi) {
      std::ostringstream line;
      line.precision(6);
      line << std::fixed << plan.models[mi].name << ',' << mean_of(cindex[mi]) << ','
           << std_of(cindex[mi]) << ',' << c_ranks[mi].mean << ',' << c_ranks[mi].std << ','
           << mean_of(ibs[mi]) << ',' << std_of(ibs[mi]) << ',' << ibs_ranks[mi].mean << ','
           << ibs_ranks[mi].std << ',' << mean_of(auc[mi]) << ',' << std_of(auc[mi]) << ','
           << auc_ranks[mi].mean << ',' << auc_ranks[mi].std << '\n';
      out << line.str();
    }
  }
  return aggregated;
}

}  // namespace tabsurv
