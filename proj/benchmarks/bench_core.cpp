#include <benchmark/benchmark.h>

#include "tabsurv/model.hpp"
#include "tabsurv/simulation.hpp"
#include "tabsurv/survhl.hpp"

namespace {

using namespace tabsurv;

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Matrix a = gaussian_features(n, n, 1);
  Matrix b = gaussian_features(n, n, 2);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_SurvHL(benchmark::State& state) {
  const std::size_t n = 256, m = 128;
  Matrix logits = gaussian_features(n, m, 3);
  Matrix p = softmax(logits);
  std::vector<std::size_t> idxs(n);
  std::vector<int> deltas(n);
  std::mt19937_64 rng(7);
  for (std::size_t i = 0; i < n; ++i) {
    idxs[i] = 1 + rng() % m;
    deltas[i] = static_cast<int>(rng() % 2);
  }
  SurvHLConfig cfg;
  Matrix grad;
  for (auto _ : state) {
    double loss = survhl_batch(p, idxs, deltas, cfg, &grad);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_SurvHL);

void BM_EnsembleForward(benchmark::State& state) {
  Matrix x = gaussian_features(512, 10, 11);
  ModelConfig cfg;
  cfg.head = HeadKind::LAS;
  cfg.ensemble = static_cast<int>(state.range(0));
  cfg.hidden = 64;
  std::vector<std::size_t> numeric(10);
  std::iota(numeric.begin(), numeric.end(), 0);
  EnsembleModel model = EnsembleModel::create(cfg, x, numeric, 32, 1.0, 5);
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    EnsembleModel::Cache cache;
    auto raw = model.forward_members(x, false, rng, cache);
    benchmark::DoNotOptimize(raw.data());
  }
}
BENCHMARK(BM_EnsembleForward)->Arg(1)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
