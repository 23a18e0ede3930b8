#include <benchmark/benchmark.h>

#include "vbl/datagen.hpp"
#include "vbl/ensemble.hpp"
#include "vbl/vbgmm.hpp"

namespace {

using namespace vbl;

Dataset three_clusters(benchmark::State& state) {
  return datagen::sample_gmm(datagen::three_cluster_spec(0, state.range(0))).data;
}

void BM_GmmEStep(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  const auto stats = gmm::initialize(data, static_cast<int>(state.range(1)), 0);
  for (auto _ : state) benchmark::DoNotOptimize(gmm::e_step(data, stats, data.size()));
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_GmmEStep)->Args({600, 3})->Args({600, 10})->Args({10000, 3});

void BM_GmmMStep(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  const auto stats = gmm::initialize(data, static_cast<int>(state.range(1)), 0);
  const auto resp = gmm::e_step(data, stats, data.size());
  for (auto _ : state) benchmark::DoNotOptimize(gmm::m_step(data, resp));
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_GmmMStep)->Args({600, 3})->Args({600, 10})->Args({10000, 3});

void BM_GmmFreeEnergy(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  const auto prior = gmm::Prior::from_data(data);
  const auto fitted = gmm::fit(data, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gmm::free_energy(data, fitted.stats, fitted.resp, prior));
}
BENCHMARK(BM_GmmFreeEnergy)->Arg(600);

void BM_GmmFit(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  for (auto _ : state) benchmark::DoNotOptimize(gmm::fit(data, static_cast<int>(state.range(1))));
}
BENCHMARK(BM_GmmFit)->Args({600, 3})->Args({600, 10})->Unit(benchmark::kMillisecond);

void BM_GmmFitAll(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  gmm::FitConfig cfg;
  cfg.parallel = false;
  for (auto _ : state) benchmark::DoNotOptimize(gmm::fit_all(data, 10, cfg));
}
BENCHMARK(BM_GmmFitAll)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_PredictiveDensity(benchmark::State& state) {
  const Dataset data = three_clusters(state);
  gmm::FitConfig cfg;
  const gmm::Model model(data, gmm::fit(data, 3, cfg), cfg);
  RefitConfig rc;
  rc.fast = state.range(1) != 0;
  const Vector q = Vector::Zero(2);
  for (auto _ : state) benchmark::DoNotOptimize(predictive_log_density(model, q, rc));
}
BENCHMARK(BM_PredictiveDensity)->Args({600, 0})->Args({600, 1});

void BM_PrecisionRegionVolume(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gmm::precision_region_log_volume(d, 1e-4, 1e6));
}
BENCHMARK(BM_PrecisionRegionVolume)->DenseRange(1, 6);

}  // namespace
