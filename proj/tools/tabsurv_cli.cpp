#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabsurv/simulation.hpp"
#include "tabsurv/train.hpp"

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tabsurv::ParseError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw tabsurv::ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

tabsurv::SurvivalDataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  tabsurv::TableSchema schema = tabsurv::TableSchema::from_json_file(schema_path);
  tabsurv::RawTable raw = tabsurv::load_csv(csv_path, schema);
  return tabsurv::preprocess(raw);
}

tabsurv::SplitSpec split_from_json(const json& j) {
  tabsurv::SplitSpec s;
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.validation_fraction = j.value("validation_fraction", s.validation_fraction);
  s.test_fraction = j.value("test_fraction", s.test_fraction);
  s.seed = j.value("seed", s.seed);
  return s;
}

int cmd_train(const std::string& data, const std::string& schema, const std::string& config,
              const std::string& out) {
  json cfg_json = read_json_file(config);
  tabsurv::TrainConfig cfg = tabsurv::TrainConfig::from_json(cfg_json);
  tabsurv::TableSchema table_schema = tabsurv::TableSchema::from_json_file(schema);
  tabsurv::RawTable raw = tabsurv::load_csv(data, table_schema);
  tabsurv::SurvivalDataset dataset = tabsurv::preprocess(raw);
  tabsurv::SplitSpec split = cfg_json.contains("split") ? split_from_json(cfg_json["split"])
                                                        : tabsurv::SplitSpec{};
  tabsurv::SplitResult parts = tabsurv::stratified_split(dataset, split);

  std::vector<tabsurv::TrainLogEntry> log;
  tabsurv::ModelBundle bundle = tabsurv::train(parts.train, parts.validation, cfg, &log);
  bundle.schema = table_schema;
  tabsurv::save_bundle(bundle, out);

  json summary = {{"bundle", out},
                  {"epochs", log.empty() ? 0 : log.back().epoch},
                  {"best_val_cindex", 0.0}};
  for (const auto& e : log)
    summary["best_val_cindex"] = std::max(summary["best_val_cindex"].get<double>(), e.val_cindex);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& bundle_path, const std::string& data, const std::string& report) {
  tabsurv::ModelBundle bundle = tabsurv::load_bundle(bundle_path);
  tabsurv::RawTable raw = tabsurv::load_csv(data, bundle.schema);
  tabsurv::SurvivalDataset dataset = tabsurv::apply_preprocessing(raw, bundle.record);
  tabsurv::MetricReport metrics = tabsurv::evaluate(bundle, dataset, /*with_ks=*/true);
  json doc = tabsurv::metric_report_to_json(metrics);
  std::ofstream out(report);
  if (!out) throw tabsurv::ValidationError("cannot open '" + report + "' for writing");
  out << doc.dump(2) << "\n";
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config, const std::string& out) {
  json j = read_json_file(config);
  tabsurv::SimConfig cfg;
  cfg.lambda0 = j.value("lambda0", cfg.lambda0);
  cfg.k0 = j.value("k0", cfg.k0);
  cfg.lambda1 = j.value("lambda1", cfg.lambda1);
  cfg.k1 = j.value("k1", cfg.k1);
  cfg.censoring_rate = j.value("censoring_rate", cfg.censoring_rate);
  cfg.cluster_prob = j.value("cluster_prob", cfg.cluster_prob);
  cfg.seed = j.value("seed", cfg.seed);
  std::size_t n = j.value("n", std::size_t{1000});
  std::size_t d = j.value("d", std::size_t{10});

  tabsurv::Matrix x = tabsurv::gaussian_features(n, d, cfg.seed);
  tabsurv::SimulatedDataset sim = tabsurv::generate(x, cfg);

  std::ofstream csv(out);
  if (!csv) throw tabsurv::ValidationError("cannot open '" + out + "' for writing");
  csv.precision(17);
  for (std::size_t f = 0; f < d; ++f) csv << "x" << f << ",";
  csv << "time,event\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) csv << x(i, f) << ",";
    csv << sim.times[i] << "," << sim.events[i] << "\n";
  }

  json meta = {{"config",
                {{"lambda0", cfg.lambda0},
                 {"k0", cfg.k0},
                 {"lambda1", cfg.lambda1},
                 {"k1", cfg.k1},
                 {"censoring_rate", cfg.censoring_rate},
                 {"cluster_prob", cfg.cluster_prob},
                 {"seed", cfg.seed},
                 {"n", n},
                 {"d", d}}},
               {"beta0", sim.beta0},
               {"beta1", sim.beta1},
               {"clusters", sim.clusters}};
  std::ofstream meta_out(out + ".meta.json");
  meta_out << meta.dump(2) << "\n";
  std::cout << json({{"out", out}, {"n", n}, {"d", d}}).dump(2) << "\n";
  return 0;
}

int cmd_benchmark(const std::string& plan_path, const std::string& out_dir) {
  json j = read_json_file(plan_path);
  tabsurv::ExperimentPlan plan = tabsurv::ExperimentPlan::from_json(j);
  if (!out_dir.empty()) plan.output_dir = out_dir;
  json aggregated = tabsurv::run_experiment(plan);
  std::cout << aggregated.dump(2) << "\n";
  return 0;
}

int cmd_search(const std::string& space_path, int budget) {
  json j = read_json_file(space_path);
  tabsurv::SurvivalDataset dataset =
      load_dataset(j.at("data").get<std::string>(), j.at("schema").get<std::string>());
  tabsurv::SplitSpec split =
      j.contains("split") ? split_from_json(j["split"]) : tabsurv::SplitSpec{};
  tabsurv::SplitResult parts = tabsurv::stratified_split(dataset, split);
  std::uint64_t seed = j.value("seed", std::uint64_t{0});
  tabsurv::TrainConfig best =
      tabsurv::random_search(j.at("space"), budget, parts.train, parts.validation, seed);
  std::cout << best.to_json().dump(2) << "\n";
  return 0;
}

void print_error(const std::string& type, const std::string& message) {
  std::cerr << json({{"error", {{"type", type}, {"message", message}}}}).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival analysis with smoothed censored histogram losses"};
  app.require_subcommand(1);

  std::string data, schema, config, out, bundle, report, plan, space;
  int budget = 10;

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and save a bundle");
  train_cmd->add_option("--data", data, "Training CSV")->required();
  train_cmd->add_option("--schema", schema, "Column schema JSON")->required();
  train_cmd->add_option("--config", config, "Training configuration JSON")->required();
  train_cmd->add_option("--out", out, "Output bundle path")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a bundle on a dataset");
  eval_cmd->add_option("--bundle", bundle, "Model bundle")->required();
  eval_cmd->add_option("--data", data, "Evaluation CSV")->required();
  eval_cmd->add_option("--report", report, "Output metric report JSON")->required();

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic survival dataset");
  sim_cmd->add_option("--config", config, "Simulation configuration JSON")->required();
  sim_cmd->add_option("--out", out, "Output CSV path")->required();

  CLI::App* bench_cmd = app.add_subcommand("benchmark", "Run a multi-model experiment plan");
  bench_cmd->add_option("--plan", plan, "Experiment plan JSON")->required();
  bench_cmd->add_option("--out", out, "Output directory")->required();

  CLI::App* search_cmd = app.add_subcommand("search", "Random hyperparameter search");
  search_cmd->add_option("--space", space, "Search space JSON")->required();
  search_cmd->add_option("--budget", budget, "Number of trials")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::stringstream msg;
    int code = app.exit(e, msg, msg);
    print_error("usage", msg.str());
    return code;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(data, schema, config, out);
    if (eval_cmd->parsed()) return cmd_eval(bundle, data, report);
    if (sim_cmd->parsed()) return cmd_simulate(config, out);
    if (bench_cmd->parsed()) return cmd_benchmark(plan, out);
    if (search_cmd->parsed()) return cmd_search(space, budget);
  } catch (const tabsurv::ParseError& e) {
    print_error("parse", e.what());
    return 2;
  } catch (const tabsurv::ValidationError& e) {
    print_error("validation", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
