#include "tabsurv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tabsurv {

void TrainConfig::validate() const {
  if (model.blocks < 1 || model.blocks > 4)
    throw ValidationError("config: blocks must be in 1..4");
  if (model.hidden < 1) throw ValidationError("config: hidden must be positive");
  if (model.ensemble < 1) throw ValidationError("config: ensemble must be >= 1");
  if (model.head == HeadKind::LS && model.ensemble != 1)
    throw ValidationError("config: LS head implies ensemble size 1");
  if (model.dropout < 0.0 || model.dropout >= 1.0)
    throw ValidationError("config: dropout must be in [0,1)");
  if (model.emb_bins < 1 || model.emb_dim < 1)
    throw ValidationError("config: embedding sizes must be positive");
  if (r < 1 || r > 5) throw ValidationError("config: r must be in 1..5");
  if (!(learning_rate > 0.0)) throw ValidationError("config: learning rate must be positive");
  if (batch_size < 1) throw ValidationError("config: batch size must be positive");
  if (!(grid_fraction > 0.0 && grid_fraction <= 1.0))
    throw ValidationError("config: grid fraction must be in (0,1]");
  if (max_epochs < 1) throw ValidationError("config: max_epochs must be >= 1");
  if (patience < 0) throw ValidationError("config: patience must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"head", head_to_string(model.head)},
          {"blocks", model.blocks},
          {"hidden", model.hidden},
          {"ensemble", model.ensemble},
          {"activation", activation_to_string(model.act)},
          {"layer_norm", model.layer_norm},
          {"dropout", model.dropout},
          {"emb_bins", model.emb_bins},
          {"emb_dim", model.emb_dim},
          {"emb_activation", model.emb_activation},
          {"r", r},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"grid_fraction", grid_fraction},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.model.head = head_from_string(j.value("head", "ls"));
  cfg.model.blocks = j.value("blocks", cfg.model.blocks);
  cfg.model.hidden = j.value("hidden", cfg.model.hidden);
  cfg.model.ensemble = j.value("ensemble", cfg.model.ensemble);
  cfg.model.act = activation_from_string(j.value("activation", "relu"));
  cfg.model.layer_norm = j.value("layer_norm", cfg.model.layer_norm);
  cfg.model.dropout = j.value("dropout", cfg.model.dropout);
  cfg.model.emb_bins = j.value("emb_bins", cfg.model.emb_bins);
  cfg.model.emb_dim = j.value("emb_dim", cfg.model.emb_dim);
  cfg.model.emb_activation = j.value("emb_activation", cfg.model.emb_activation);
  cfg.r = j.value("r", cfg.r);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.grid_fraction = j.value("grid_fraction", cfg.grid_fraction);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.patience = j.value("patience", cfg.patience);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 1.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Computes per-member loss and the gradient wrt the member's raw outputs.
double member_loss_and_grad(HeadKind head, const Matrix& raw,
                            const std::vector<std::size_t>& idxs,
                            const std::vector<int>& deltas, const SurvHLConfig& loss_cfg,
                            const TimeGrid& grid, Matrix* grad_raw) {
  if (!is_weibull_head(head)) {
    Matrix p = softmax(raw);
    Matrix gp;
    double loss = survhl_batch(p, idxs, deltas, loss_cfg, grad_raw ? &gp : nullptr);
    if (grad_raw) *grad_raw = softmax_backward(p, gp);
    return loss;
  }
  const std::size_t b = raw.rows();
  const std::size_t m = grid.m();
  Matrix p(b, m);
  Matrix dpdl(b, m), dpdk(b, m);
  for (std::size_t r = 0; r < b; ++r) {
    WeibullParams wp = EnsembleModel::positive_weibull(raw(r, 0), raw(r, 1));
    std::vector<double> pr, dl, dk;
    weibull_probs_grad(wp, grid, &pr, &dl, &dk);
    std::copy(pr.begin(), pr.end(), p.row_ptr(r));
    std::copy(dl.begin(), dl.end(), dpdl.row_ptr(r));
    std::copy(dk.begin(), dk.end(), dpdk.row_ptr(r));
  }
  Matrix gp;
  double loss = survhl_batch(p, idxs, deltas, loss_cfg, grad_raw ? &gp : nullptr);
  if (grad_raw) {
    *grad_raw = Matrix(b, 2);
    for (std::size_t r = 0; r < b; ++r) {
      double gl = 0.0, gk = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        gl += gp(r, j) * dpdl(r, j);
        gk += gp(r, j) * dpdk(r, j);
      }
      (*grad_raw)(r, 0) = gl * softplus_derivative(raw(r, 0));
      (*grad_raw)(r, 1) = gk * softplus_derivative(raw(r, 1));
    }
  }
  return loss;
}

double validation_cindex(const EnsembleModel& model, const TimeGrid& grid,
                         const SurvivalDataset& val_set) {
  std::vector<DiscreteSurvival> curves = model.predict(val_set.features, grid);
  std::vector<double> pred(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) pred[i] = expected_time(curves[i], grid);
  return harrell_cindex(pred, val_set.times, val_set.events);
}

}  // namespace

ModelBundle train(const SurvivalDataset& train_set, const SurvivalDataset& val_set,
                  const TrainConfig& cfg, std::vector<TrainLogEntry>* log) {
  cfg.validate();
  const std::size_t n = train_set.n();
  if (n == 0) throw ValidationError("train: empty training set");

  TimeGrid grid = build_grid(train_set.times, train_set.events, cfg.grid_fraction);

  std::vector<std::size_t> idx_of_time(n);
  for (std::size_t i = 0; i < n; ++i) idx_of_time[i] = interval_index(grid, train_set.times[i]);

  std::vector<double> uncensored;
  for (std::size_t i = 0; i < n; ++i)
    if (train_set.events[i] == 1) uncensored.push_back(train_set.times[i]);
  const double median_event = median_of(uncensored);

  EnsembleModel model = EnsembleModel::create(cfg.model, train_set.features,
                                              train_set.record.numeric_output_columns(),
                                              grid.m(), median_event, cfg.seed);

  SurvHLConfig loss_cfg;
  loss_cfg.r = cfg.r;

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  AdamState adam(adam_cfg);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double best_cindex = -1.0;
  std::map<std::string, Matrix> best_params;
  int epochs_without_improvement = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> batch(order.begin() + static_cast<long>(start),
                                     order.begin() + static_cast<long>(end));
      Matrix x = train_set.features.take_rows(batch);
      std::vector<std::size_t> idxs(batch.size());
      std::vector<int> deltas(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        idxs[i] = idx_of_time[batch[i]];
        deltas[i] = train_set.events[batch[i]];
      }
      EnsembleModel::Cache cache;
      std::vector<Matrix> raw = model.forward_members(x, true, rng, cache);
      std::vector<Matrix> grads(raw.size());
      double batch_loss = 0.0;
      for (std::size_t mem = 0; mem < raw.size(); ++mem)
        batch_loss += member_loss_and_grad(cfg.model.head, raw[mem], idxs, deltas, loss_cfg,
                                           grid, &grads[mem]);
      if (!std::isfinite(batch_loss))
        throw ValidationError("train: loss diverged at epoch " + std::to_string(epoch));
      model.backward_members(grads, cache);
      adam.step(model.params());
      epoch_loss += batch_loss;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);

    double val_c = validation_cindex(model, grid, val_set);
    if (log) log->push_back({epoch, epoch_loss, val_c});

    if (val_c > best_cindex) {
      best_cindex = val_c;
      best_params.clear();
      for (const auto& [name, p] : model.params().entries()) best_params[name] = p.value;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement > cfg.patience) break;
    }
  }

  for (auto& [name, p] : model.params().entries()) p.value = best_params.at(name);

  ModelBundle bundle;
  bundle.cfg = cfg;
  bundle.record = train_set.record;
  bundle.grid = std::move(grid);
  bundle.model = std::move(model);
  std::vector<int> flipped(train_set.events.size());
  for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - train_set.events[i];
  bundle.censoring_km = kaplan_meier(train_set.times, flipped);
  return bundle;
}

MetricReport evaluate(const ModelBundle& bundle, const SurvivalDataset& test_set, bool with_ks) {
  if (test_set.features.cols() != bundle.record.output_dim())
    throw ValidationError("evaluate: test features have " +
                          std::to_string(test_set.features.cols()) + " columns, bundle expects " +
                          std::to_string(bundle.record.output_dim()));
  std::vector<DiscreteSurvival> curves = bundle.model.predict(test_set.features, bundle.grid);
  std::vector<double> pred(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) pred[i] = expected_time(curves[i], bundle.grid);

  MetricReport report;
  report.c_index = harrell_cindex(pred, test_set.times, test_set.events);
  SurvPredictor predictor = make_predictor(curves, bundle.grid);
  report.ibs = integrated_brier(predictor, bundle.grid, test_set.times, test_set.events,
                                bundle.censoring_km);
  report.integrated_auc =
      cumulative_dynamic_auc(predictor, test_set.times, test_set.events, bundle.censoring_km,
                             default_eval_times(test_set.times, test_set.events))
          .integrated;
  if (with_ks) {
    std::vector<double> observed;
    for (std::size_t i = 0; i < test_set.n(); ++i)
      if (test_set.events[i] == 1) observed.push_back(test_set.times[i]);
    report.ks = ks_statistic(curves, bundle.grid, observed);
  }
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
  nlohmann::json j = {{"c_index", report.c_index},
                      {"ibs", report.ibs},
                      {"integrated_auc", report.integrated_auc}};
  if (report.ks) j["ks"] = *report.ks;
  return j;
}

TrainConfig sample_config(const nlohmann::json& space, std::mt19937_64& rng) {
  nlohmann::json out;
  for (auto it = space.begin(); it != space.end(); ++it) {
    const nlohmann::json& v = it.value();
    if (v.is_array()) {
      std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
      out[it.key()] = v[pick(rng)];
    } else if (v.is_object() && v.contains("log_uniform")) {
      double lo = v["log_uniform"][0].get<double>();
      double hi = v["log_uniform"][1].get<double>();
      std::uniform_real_distribution<double> unif(std::log(lo), std::log(hi));
      out[it.key()] = std::exp(unif(rng));
    } else {
      out[it.key()] = v;
    }
  }
  return TrainConfig::from_json(out);
}

TrainConfig random_search(const nlohmann::json& space, int budget,
                          const SurvivalDataset& train_set, const SurvivalDataset& val_set,
                          std::uint64_t seed) {
  if (budget < 1) throw ValidationError("random_search: budget must be >= 1");
  std::mt19937_64 rng(seed ^ 0xa24baed4963ee407ULL);
  bool have_best = false;
  TrainConfig best;
  double best_c = -1.0;
  int failures = 0;
  for (int trial = 0; trial < budget; ++trial) {
    TrainConfig cfg = sample_config(space, rng);
    cfg.seed = seed;
    try {
      ModelBundle bundle = train(train_set, val_set, cfg);
      double c = validation_cindex(bundle.model, bundle.grid, val_set);
      if (c > best_c) {
        best_c = c;
        best = cfg;
        have_best = true;
      }
    } catch (const std::exception&) {
      ++failures;
    }
  }
  if (!have_best)
    throw ValidationError("random_search: all " + std::to_string(failures) + " trials failed");
  return best;
}

}  // namespace tabsurv
