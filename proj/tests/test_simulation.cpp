#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "tabsurv/simulation.hpp"

using namespace tabsurv;

TEST_CASE("assign_clusters is balanced and deterministic") {
  std::vector<int> labels = assign_clusters(100000, 0.5, 11);
  double frac = 0.0;
  for (int l : labels) frac += l;
  frac /= 100000.0;
  CHECK(std::fabs(frac - 0.5) < 0.01);
  CHECK(assign_clusters(100000, 0.5, 11) == labels);
  std::vector<int> tiny = assign_clusters(2, 0.5, 1);
  for (int l : tiny) CHECK((l == 0 || l == 1));
  CHECK_THROWS_AS(assign_clusters(1, 0.5, 0), ValidationError);
}

TEST_CASE("sample_event_time unit inversion") {
  // u = e^-1, lambda*e^{beta x} = 1, k = 2 -> T = 1
  SimConfig cfg;
  cfg.lambda0 = 1.0;
  cfg.k0 = 2.0;
  double t = sample_event_time({0.0}, 0, cfg, {0.0}, {0.0}, std::exp(-1.0));
  CHECK(t == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(sample_event_time({0.0}, 0, cfg, {0.0}, {0.0}, 0.0), ValidationError);
  CHECK_THROWS_AS(sample_event_time({0.0}, 0, cfg, {0.0}, {0.0}, 1.0), ValidationError);
}

TEST_CASE("sample_event_time is positive finite and monotone in the score") {
  SimConfig cfg;  // defaults: lambda0=1e-5, k0=4
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(1e-6, 1.0 - 1e-6);
  for (int trial = 0; trial < 500; ++trial) {
    double u = unif(rng);
    double t = sample_event_time({0.5}, 0, cfg, {1.0}, {0.0}, u);
    CHECK(t > 0.0);
    CHECK(std::isfinite(t));
    // larger score -> smaller T at the same u
    double t_hi = sample_event_time({2.0}, 0, cfg, {1.0}, {0.0}, u);
    CHECK(t_hi < t);
  }
}

TEST_CASE("Monte Carlo CDF matches the analytic Weibull at fixed x") {
  // x = 0: F(t) = 1 - exp(-1e-5 t^4)
  SimConfig cfg;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(1e-12, 1.0 - 1e-12);
  const std::size_t n = 100000;
  std::vector<double> draws(n);
  for (double& t : draws) t = sample_event_time({0.0}, 0, cfg, {0.7}, {0.0}, unif(rng));
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double analytic = 1.0 - std::exp(-1e-5 * std::pow(draws[i], 4.0));
    double emp_hi = static_cast<double>(i + 1) / n;
    double emp_lo = static_cast<double>(i) / n;
    ks = std::max(ks, std::max(std::fabs(analytic - emp_hi), std::fabs(analytic - emp_lo)));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("generate: censoring is indicator-only with the right rate") {
  Matrix x = gaussian_features(10000, 5, 9);
  SimConfig cfg;
  cfg.censoring_rate = 0.2;
  cfg.seed = 4;
  SimulatedDataset sim = generate(x, cfg);
  double event_rate = 0.0;
  for (int e : sim.events) event_rate += e;
  event_rate /= 10000.0;
  CHECK(std::fabs(event_rate - 0.8) <= 0.02);
  for (std::size_t i = 0; i < sim.times.size(); ++i) {
    CHECK(sim.times[i] == sim.true_times[i]);
    CHECK(sim.times[i] > 0.0);
  }

  SimConfig no_cens = cfg;
  no_cens.censoring_rate = 0.0;
  SimulatedDataset all_events = generate(x, no_cens);
  for (int e : all_events.events) CHECK(e == 1);

  // bit-determinism
  SimulatedDataset again = generate(x, cfg);
  CHECK(again.times == sim.times);
  CHECK(again.events == sim.events);
  CHECK(again.beta0 == sim.beta0);
  CHECK(again.beta1 == sim.beta1);
}

TEST_CASE("beta draws respect their supports") {
  Matrix x = gaussian_features(100, 8, 2);
  SimConfig cfg;
  cfg.seed = 13;
  SimulatedDataset sim = generate(x, cfg);
  REQUIRE(sim.beta0.size() == 8);
  for (double b : sim.beta0) {
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
  for (double b : sim.beta1) {
    CHECK(b >= -1.0);
    CHECK(b <= 1.0);
  }
}

TEST_CASE("pooled event times are bimodal for the default parameters") {
  Matrix x = gaussian_features(100000, 5, 31);
  SimConfig cfg;
  cfg.censoring_rate = 0.0;
  cfg.seed = 31;
  SimulatedDataset sim = generate(x, cfg);
  // histogram over log-times; the two clusters have very different scales
  std::vector<double> logs(sim.times.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(sim.times[i]);
  double lo = *std::min_element(logs.begin(), logs.end());
  double hi = *std::max_element(logs.begin(), logs.end());
  const int bins = 40;
  std::vector<int> hist(bins, 0);
  for (double v : logs) {
    int b = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
    ++hist[b];
  }
  // count local maxima separated by a trough at 50% of the smaller peak
  int peak1 = *std::max_element(hist.begin(), hist.begin() + bins / 2);
  int peak2 = *std::max_element(hist.begin() + bins / 2, hist.end());
  int trough = *std::min_element(hist.begin() + bins / 3, hist.end() - bins / 3);
  CHECK(trough < peak1 / 2);
  CHECK(trough < peak2 / 2);
}
