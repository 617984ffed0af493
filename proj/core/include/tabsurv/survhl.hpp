#pragma once

#include <vector>

#include "tabsurv/matrix.hpp"
#include "tabsurv/timegrid.hpp"

namespace tabsurv {

struct SurvHLConfig {
  int r = 3;               // smoothing radius, sigma = r/3
  double epsilon = 1e-12;  // clamp inside logs
  bool delta_weights = false;  // test mode: Kronecker delta instead of a Gaussian window
};

/// Truncated Gaussian weights over bins {1..m}, centered at `center`
/// (1-based), sigma = r/3, support [center-r, center+r], normalized to sum 1.
std::vector<double> gaussian_weights(std::size_t center, int r, std::size_t m);

/// Per-row loss: smoothed negative log bin probability for uncensored rows,
/// negative log survival at the censoring index for censored rows.
/// idx is I(t) in {0..m}; idx=0 with delta=1 is clamped to bin 1, idx=0 with
/// delta=0 contributes zero loss (S_0 = 1).
double survhl_row(const DiscreteSurvival& curve, std::size_t idx, int delta,
                  const SurvHLConfig& cfg);

/// Batch loss on a b x m probability matrix. Returns the mean of the per-row
/// losses and writes the gradient wrt each p entry into grad_p (same shape;
/// overwritten). Clamped coordinates receive zero gradient.
double survhl_batch(const Matrix& p, const std::vector<std::size_t>& idxs,
                    const std::vector<int>& deltas, const SurvHLConfig& cfg, Matrix* grad_p);

}  // namespace tabsurv
