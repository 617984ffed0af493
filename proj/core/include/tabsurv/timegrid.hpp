#pragma once

#include <cstddef>
#include <vector>

#include "tabsurv/matrix.hpp"

namespace tabsurv {

/// Discretization grid: the ordered unique uncensored training event times
/// tau_1 < ... < tau_m. tau_{m+1} = +inf is implicit.
struct TimeGrid {
  std::vector<double> taus;

  std::size_t m() const { return taus.size(); }
};

/// Per-instance discrete event-time distribution on a grid: bin
/// probabilities summing to 1 and the survival values S_i = 1 - sum_{j<=i} p_j.
struct DiscreteSurvival {
  std::vector<double> probs;
  std::vector<double> survival;
};

/// Builds the grid from uncensored training times. When fraction < 1 the grid
/// is subsampled to ceil(fraction*m) evenly spaced order statistics, always
/// keeping the smallest and largest times.
TimeGrid build_grid(const std::vector<double>& train_times,
                    const std::vector<int>& train_events, double fraction = 1.0);

/// I(t) = max{ i : tau_i <= t } with 1-based bins; returns 0 when t < tau_1.
std::size_t interval_index(const TimeGrid& grid, double t);

/// Converts a simplex vector of bin probabilities into a survival curve.
/// Throws if |sum p - 1| > 1e-4.
DiscreteSurvival probs_to_survival(const std::vector<double>& p);

/// Right-continuous step evaluation: 1 before tau_1, S_{I(t)} otherwise.
double survival_at(const DiscreteSurvival& curve, const TimeGrid& grid, double t);

}  // namespace tabsurv
