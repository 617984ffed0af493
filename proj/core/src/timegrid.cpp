#include "tabsurv/timegrid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tabsurv {

TimeGrid build_grid(const std::vector<double>& train_times,
                    const std::vector<int>& train_events, double fraction) {
  if (train_times.size() != train_events.size())
    throw ValidationError("build_grid: times/events length mismatch");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValidationError("build_grid: fraction must be in (0,1]");
  std::set<double> uniq;
  for (std::size_t i = 0; i < train_times.size(); ++i)
    if (train_events[i] == 1) uniq.insert(train_times[i]);
  if (uniq.size() < 2)
    throw ValidationError("build_grid: need at least 2 distinct uncensored times, got " +
                          std::to_string(uniq.size()));
  std::vector<double> taus(uniq.begin(), uniq.end());
  const std::size_t m = taus.size();
  std::size_t target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m)));
  target = std::max<std::size_t>(target, 2);
  if (target < m) {
    // Evenly spaced order statistics, endpoints pinned.
    std::vector<double> sub(target);
    for (std::size_t j = 0; j < target; ++j) {
      std::size_t idx = static_cast<std::size_t>(
          std::llround(static_cast<double>(j) * static_cast<double>(m - 1) /
                       static_cast<double>(target - 1)));
      sub[j] = taus[idx];
    }
    taus = std::move(sub);
  }
  TimeGrid grid;
  grid.taus = std::move(taus);
  return grid;
}

std::size_t interval_index(const TimeGrid& grid, double t) {
  if (!(t > 0.0)) throw ValidationError("interval_index: t must be positive");
  auto it = std::upper_bound(grid.taus.begin(), grid.taus.end(), t);
  return static_cast<std::size_t>(it - grid.taus.begin());
}

DiscreteSurvival probs_to_survival(const std::vector<double>& p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-9) throw ValidationError("probs_to_survival: negative probability");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-4)
    throw ValidationError("probs_to_survival: probabilities sum to " + std::to_string(sum));
  DiscreteSurvival out;
  out.probs = p;
  out.survival.resize(p.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cum += p[i];
    out.survival[i] = std::min(1.0, std::max(0.0, 1.0 - cum));
  }
  return out;
}

double survival_at(const DiscreteSurvival& curve, const TimeGrid& grid, double t) {
  if (t == 0.0) return 1.0;  // everyone is alive at the origin
  std::size_t idx = interval_index(grid, t);
  if (idx == 0) return 1.0;
  return curve.survival[idx - 1];
}

}  // namespace tabsurv
