#pragma once

#include <cstdint>
#include <vector>

#include "tabsurv/dataset.hpp"
#include "tabsurv/matrix.hpp"

namespace tabsurv {

/// Bimodal covariate-dependent Weibull simulation: two latent clusters with
/// proportional-hazards Weibull event times and independent Bernoulli
/// censoring indicators.
struct SimConfig {
  double lambda0 = 1e-5;
  double k0 = 4.0;
  double lambda1 = 1e-10;
  double k1 = 6.0;
  double censoring_rate = 0.2;
  double cluster_prob = 0.5;
  std::uint64_t seed = 0;
};

struct SimulatedDataset {
  Matrix features;
  std::vector<double> times;       // observed times (equal to true times; censoring is label-only)
  std::vector<int> events;
  std::vector<int> clusters;
  std::vector<double> true_times;
  std::vector<double> beta0;  // per-experiment coefficient draws
  std::vector<double> beta1;
};

/// i.i.d. Bernoulli(cluster_prob) labels.
std::vector<int> assign_clusters(std::size_t n, double cluster_prob, std::uint64_t seed);

/// Inverts the Weibull proportional-hazards survival
/// S(t|x) = exp(-lambda_c e^{beta_c^T x} t^{k_c}) at a uniform draw u.
double sample_event_time(const std::vector<double>& x, int cluster, const SimConfig& cfg,
                         const std::vector<double>& beta0, const std::vector<double>& beta1,
                         double u);

/// Full generation over a preprocessed (finite, standardized) feature matrix.
SimulatedDataset generate(const Matrix& base_features, const SimConfig& cfg);

/// Bundled substitute covariates: standard Gaussian n x d matrix.
Matrix gaussian_features(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace tabsurv
