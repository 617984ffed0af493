#include "tabsurv/survhl.hpp"

#include <algorithm>
#include <cmath>

namespace tabsurv {

std::vector<double> gaussian_weights(std::size_t center, int r, std::size_t m) {
  if (center < 1 || center > m)
    throw ValidationError("gaussian_weights: center " + std::to_string(center) +
                          " out of range 1.." + std::to_string(m));
  if (r < 1) throw ValidationError("gaussian_weights: r must be >= 1");
  std::vector<double> w(m, 0.0);
  const double sigma = static_cast<double>(r) / 3.0;
  const long c = static_cast<long>(center);
  const long lo = std::max<long>(1, c - r);
  const long hi = std::min<long>(static_cast<long>(m), c + r);
  double sum = 0.0;
  for (long j = lo; j <= hi; ++j) {
    double d = static_cast<double>(j - c);
    double v = std::exp(-d * d / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(j - 1)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

double survhl_row(const DiscreteSurvival& curve, std::size_t idx, int delta,
                  const SurvHLConfig& cfg) {
  const std::size_t m = curve.probs.size();
  if (idx > m) throw ValidationError("survhl_row: index out of range");
  if (delta == 1) {
    std::size_t center = idx == 0 ? 1 : idx;  // events before the grid go to bin 1
    if (cfg.delta_weights) {
      return -std::log(std::max(curve.probs[center - 1], cfg.epsilon));
    }
    std::vector<double> w = gaussian_weights(center, cfg.r, m);
    double loss = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (w[j] > 0.0) loss -= w[j] * std::log(std::max(curve.probs[j], cfg.epsilon));
    return loss;
  }
  if (idx == 0) return 0.0;  // S_0 = 1
  return -std::log(std::max(curve.survival[idx - 1], cfg.epsilon));
}

double survhl_batch(const Matrix& p, const std::vector<std::size_t>& idxs,
                    const std::vector<int>& deltas, const SurvHLConfig& cfg, Matrix* grad_p) {
  const std::size_t n = p.rows();
  const std::size_t m = p.cols();
  if (n == 0) throw ValidationError("survhl_batch: empty batch");
  if (idxs.size() != n || deltas.size() != n)
    throw ValidationError("survhl_batch: length mismatch");
  if (grad_p) *grad_p = Matrix(n, m);

  const double invn = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* pr = p.row_ptr(i);
    double* gr = grad_p ? grad_p->row_ptr(i) : nullptr;
    if (deltas[i] == 1) {
      std::size_t center = idxs[i] == 0 ? 1 : idxs[i];
      if (cfg.delta_weights) {
        double pj = pr[center - 1];
        total += -std::log(std::max(pj, cfg.epsilon));
        if (gr && pj > cfg.epsilon) gr[center - 1] = -invn / pj;
        continue;
      }
      const double sigma = static_cast<double>(cfg.r) / 3.0;
      const long c = static_cast<long>(center);
      const long lo = std::max<long>(1, c - cfg.r);
      const long hi = std::min<long>(static_cast<long>(m), c + cfg.r);
      double wsum = 0.0;
      for (long j = lo; j <= hi; ++j) {
        double d = static_cast<double>(j - c);
        wsum += std::exp(-d * d / (2.0 * sigma * sigma));
      }
      for (long j = lo; j <= hi; ++j) {
        double d = static_cast<double>(j - c);
        double w = std::exp(-d * d / (2.0 * sigma * sigma)) / wsum;
        double pj = pr[static_cast<std::size_t>(j - 1)];
        total += -w * std::log(std::max(pj, cfg.epsilon));
        if (gr && pj > cfg.epsilon) gr[static_cast<std::size_t>(j - 1)] = -invn * w / pj;
      }
    } else {
      std::size_t idx = idxs[i];
      if (idx == 0) continue;
      double s = 1.0;
      for (std::size_t j = 0; j < idx; ++j) s -= pr[j];
      total += -std::log(std::max(s, cfg.epsilon));
      if (gr && s > cfg.epsilon)
        for (std::size_t j = 0; j < idx; ++j) gr[j] = invn / s;
    }
  }
  return total * invn;
}

}  // namespace tabsurv
