#include "tabsurv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace tabsurv {

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<int>& events) {
  if (times.empty()) throw ValidationError("kaplan_meier: empty input");
  if (times.size() != events.size())
    throw ValidationError("kaplan_meier: times/events length mismatch");
  std::map<double, std::pair<std::size_t, std::size_t>> counts;  // time -> (events, total)
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0)) throw ValidationError("kaplan_meier: nonpositive time");
    auto& c = counts[times[i]];
    c.second += 1;
    if (events[i] == 1) c.first += 1;
  }
  StepFunction sf;
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (const auto& [t, c] : counts) {
    const auto [d, total] = c;
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      sf.times.push_back(t);
      sf.values.push_back(s);
    }
    at_risk -= total;
  }
  return sf;
}

double expected_time(const DiscreteSurvival& curve, const TimeGrid& grid) {
  if (curve.probs.size() != grid.m())
    throw ValidationError("expected_time: curve/grid size mismatch");
  double t = 0.0;
  for (std::size_t i = 0; i < grid.m(); ++i) t += curve.probs[i] * grid.taus[i];
  return t;
}

double harrell_cindex(const std::vector<double>& predicted_times,
                      const std::vector<double>& times, const std::vector<int>& events) {
  const std::size_t n = times.size();
  if (predicted_times.size() != n || events.size() != n)
    throw ValidationError("harrell_cindex: length mismatch");
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (events[i] != 1) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (times[i] >= times[j]) continue;
      ++pairs;
      if (predicted_times[i] < predicted_times[j])
        concordant += 1.0;
      else if (predicted_times[i] == predicted_times[j])
        concordant += 0.5;
    }
  }
  if (pairs == 0) throw ValidationError("harrell_cindex: no comparable pairs");
  return concordant / static_cast<double>(pairs);
}

SurvPredictor make_predictor(const std::vector<DiscreteSurvival>& curves, const TimeGrid& grid) {
  return [&curves, &grid](std::size_t i, double t) { return survival_at(curves[i], grid, t); };
}

double brier_score(const SurvPredictor& surv, const std::vector<double>& times,
                   const std::vector<int>& events, const StepFunction& censoring, double t) {
  const std::size_t n = times.size();
  if (n == 0) throw ValidationError("brier_score: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = surv(i, t);
    if (times[i] <= t && events[i] == 1) {
      double g = censoring.left_limit(times[i]);
      if (!(g > 0.0))
        throw ValidationError("brier_score: censoring distribution hits 0 before t=" +
                              std::to_string(t));
      total += s * s / g;
    } else if (times[i] > t) {
      double g = censoring(t);
      if (!(g > 0.0))
        throw ValidationError("brier_score: censoring distribution hits 0 at t=" +
                              std::to_string(t));
      total += (1.0 - s) * (1.0 - s) / g;
    }
    // censored with t_i <= t contributes 0
  }
  return total / static_cast<double>(n);
}

double integrated_brier(const SurvPredictor& surv, const TimeGrid& grid,
                        const std::vector<double>& times, const std::vector<int>& events,
                        const StepFunction& censoring) {
  double t_max = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events[i] == 1) t_max = std::max(t_max, times[i]);
  if (!(t_max > 0.0)) throw ValidationError("integrated_brier: no uncensored times");

  // The Graf weights are undefined once the censoring distribution reaches 0,
  // so the horizon is capped at the last point where G stays positive.
  double t_zero = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < censoring.times.size(); ++i)
    if (!(censoring.values[i] > 0.0)) {
      t_zero = censoring.times[i];
      break;
    }

  std::vector<double> pts = {0.0};
  for (double tau : grid.taus)
    if (tau > 0.0 && tau <= t_max && tau < t_zero) pts.push_back(tau);
  if (t_max < t_zero && pts.back() < t_max) pts.push_back(t_max);
  if (pts.size() < 2) throw ValidationError("integrated_brier: fewer than 2 evaluation points");

  std::vector<double> bs(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    bs[i] = brier_score(surv, times, events, censoring, pts[i]);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    integral += 0.5 * (bs[i] + bs[i + 1]) * (pts[i + 1] - pts[i]);
  return integral / pts.back();
}

AucResult cumulative_dynamic_auc(const SurvPredictor& surv, const std::vector<double>& times,
                                 const std::vector<int>& events, const StepFunction& censoring,
                                 const std::vector<double>& eval_times) {
  const std::size_t n = times.size();
  AucResult res;
  for (double t : eval_times) {
    std::vector<std::size_t> cases, controls;
    for (std::size_t i = 0; i < n; ++i) {
      if (events[i] == 1 && times[i] <= t)
        cases.push_back(i);
      else if (times[i] > t)
        controls.push_back(i);
    }
    if (cases.empty() || controls.empty()) continue;  // skipped horizon
    // Skip horizons whose IPCW weights are undefined (G already at 0 there),
    // like horizons without a case/control pair.
    bool weights_defined = true;
    for (std::size_t i : cases)
      if (!(censoring.left_limit(times[i]) > 0.0)) {
        weights_defined = false;
        break;
      }
    if (!weights_defined) continue;
    std::vector<double> risk(n, 0.0);
    for (std::size_t i : cases) risk[i] = 1.0 - surv(i, t);
    for (std::size_t j : controls) risk[j] = 1.0 - surv(j, t);
    double num = 0.0, wsum = 0.0;
    for (std::size_t i : cases) {
      double w = 1.0 / censoring.left_limit(times[i]);
      wsum += w;
      for (std::size_t j : controls) {
        if (risk[i] > risk[j])
          num += w;
        else if (risk[i] == risk[j])
          num += 0.5 * w;
      }
    }
    res.eval_times.push_back(t);
    res.aucs.push_back(num / (wsum * static_cast<double>(controls.size())));
  }
  if (res.aucs.empty())
    throw ValidationError("cumulative_dynamic_auc: no evaluation time has a case/control pair");
  res.integrated = std::accumulate(res.aucs.begin(), res.aucs.end(), 0.0) /
                   static_cast<double>(res.aucs.size());
  return res;
}

std::vector<double> default_eval_times(const std::vector<double>& times,
                                       const std::vector<int>& events) {
  std::vector<double> unc;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events[i] == 1) unc.push_back(times[i]);
  if (unc.empty()) throw ValidationError("default_eval_times: no uncensored times");
  std::sort(unc.begin(), unc.end());
  std::vector<double> out;
  for (int d = 1; d <= 9; ++d) {
    double q = static_cast<double>(d) / 10.0;
    std::size_t idx =
        static_cast<std::size_t>(std::llround(q * static_cast<double>(unc.size() - 1)));
    double t = unc[idx];
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

double ks_statistic(const std::vector<DiscreteSurvival>& curves, const TimeGrid& grid,
                    const std::vector<double>& observed_times) {
  if (curves.empty() || observed_times.empty())
    throw ValidationError("ks_statistic: empty inputs");
  const std::size_t m = grid.m();
  std::vector<double> mean_p(m, 0.0);
  for (const DiscreteSurvival& c : curves) {
    if (c.probs.size() != m) throw ValidationError("ks_statistic: curve/grid size mismatch");
    for (std::size_t i = 0; i < m; ++i) mean_p[i] += c.probs[i];
  }
  for (double& v : mean_p) v /= static_cast<double>(curves.size());

  std::vector<double> obs = observed_times;
  std::sort(obs.begin(), obs.end());
  double ks = 0.0, model_cdf = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    model_cdf += mean_p[i];
    auto it = std::upper_bound(obs.begin(), obs.end(), grid.taus[i]);
    double emp = static_cast<double>(it - obs.begin()) / static_cast<double>(obs.size());
    ks = std::max(ks, std::fabs(model_cdf - emp));
  }
  return std::min(ks, 1.0);
}

std::vector<RankSummary> rank_models(const std::vector<std::vector<double>>& values,
                                     bool higher_is_better) {
  if (values.empty()) throw ValidationError("rank_models: no models");
  const std::size_t n_models = values.size();
  const std::size_t n_runs = values[0].size();
  for (const auto& v : values)
    if (v.size() != n_runs) throw ValidationError("rank_models: mismatched run counts");
  std::vector<std::vector<double>> ranks(n_models, std::vector<double>(n_runs, 0.0));
  for (std::size_t r = 0; r < n_runs; ++r) {
    std::vector<std::size_t> order(n_models);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return higher_is_better ? values[a][r] > values[b][r] : values[a][r] < values[b][r];
    });
    std::size_t i = 0;
    while (i < n_models) {
      std::size_t j = i;
      while (j + 1 < n_models && values[order[j + 1]][r] == values[order[i]][r]) ++j;
      double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) ranks[order[k]][r] = shared;
      i = j + 1;
    }
  }
  std::vector<RankSummary> out(n_models);
  for (std::size_t mdl = 0; mdl < n_models; ++mdl) {
    double mean = std::accumulate(ranks[mdl].begin(), ranks[mdl].end(), 0.0) /
                  static_cast<double>(n_runs);
    double ss = 0.0;
    for (double v : ranks[mdl]) ss += (v - mean) * (v - mean);
    out[mdl] = {mean, std::sqrt(ss / static_cast<double>(n_runs))};
  }
  return out;
}

}  // namespace tabsurv
