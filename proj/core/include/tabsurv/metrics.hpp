#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tabsurv/timegrid.hpp"

namespace tabsurv {

/// Right-continuous step function on (0, inf) with a constant value before the
/// first jump. Used for Kaplan-Meier curves and the censoring distribution G.
struct StepFunction {
  std::vector<double> times;   // sorted jump locations
  std::vector<double> values;  // value on [times[i], times[i+1])
  double initial = 1.0;

  double operator()(double t) const;
  /// Left limit: value just before t.
  double left_limit(double t) const;
};

/// Product-limit estimator over distinct event times. Pass flipped indicators
/// (1 - delta) to estimate the censoring distribution G.
StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<int>& events);

/// Expected event time with left-endpoint bin representatives: sum p_i tau_i.
double expected_time(const DiscreteSurvival& curve, const TimeGrid& grid);

/// Harrell's C over comparable pairs {(i,j): delta_i=1, t_i<t_j}; prediction
/// ties count 0.5. Throws if no comparable pair exists.
double harrell_cindex(const std::vector<double>& predicted_times,
                      const std::vector<double>& times, const std::vector<int>& events);

/// Row-indexed survival evaluator S(t | x_i); decouples metrics from curve
/// storage.
using SurvPredictor = std::function<double(std::size_t, double)>;

SurvPredictor make_predictor(const std::vector<DiscreteSurvival>& curves, const TimeGrid& grid);

/// IPCW Brier score at horizon t (Graf estimator). G must be positive over the
/// evaluated region.
double brier_score(const SurvPredictor& surv, const std::vector<double>& times,
                   const std::vector<int>& events, const StepFunction& censoring, double t);

/// Trapezoidal IBS over [0, t_max], t_max = largest uncensored time,
/// evaluated at grid points inside the horizon, normalized by t_max.
double integrated_brier(const SurvPredictor& surv, const TimeGrid& grid,
                        const std::vector<double>& times, const std::vector<int>& events,
                        const StepFunction& censoring);

struct AucResult {
  std::vector<double> eval_times;  // times actually used (skipped ones removed)
  std::vector<double> aucs;
  double integrated = 0.0;
};

/// Cumulative/dynamic AUC with IPCW case weights 1/G(t_i-); ties get 0.5.
/// Times without a valid case/control pair are skipped; all skipped is an
/// error. Integrated value is the unweighted mean over surviving times.
AucResult cumulative_dynamic_auc(const SurvPredictor& surv, const std::vector<double>& times,
                                 const std::vector<int>& events, const StepFunction& censoring,
                                 const std::vector<double>& eval_times);

/// Interior deciles (10th..90th percentile) of uncensored times.
std::vector<double> default_eval_times(const std::vector<double>& times,
                                       const std::vector<int>& events);

/// Max absolute difference between the population-mean predicted CDF and the
/// empirical CDF of observed event times, both evaluated at the grid points.
double ks_statistic(const std::vector<DiscreteSurvival>& curves, const TimeGrid& grid,
                    const std::vector<double>& observed_times);

struct RankSummary {
  double mean = 0.0;
  double std = 0.0;
};

/// Per-run dense ranks (1 = best, ties share the mean rank) across models;
/// returns per-model mean and std of ranks. values[model][run].
std::vector<RankSummary> rank_models(const std::vector<std::vector<double>>& values,
                                     bool higher_is_better);

struct MetricReport {
  double c_index = 0.0;
  double ibs = 0.0;
  double integrated_auc = 0.0;
  std::optional<double> ks;
};

}  // namespace tabsurv
