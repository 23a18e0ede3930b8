#include <benchmark/benchmark.h>

#include "vbl/datagen.hpp"
#include "vbl/vbbss.hpp"

namespace {

using namespace vbl;

datagen::BssSample mixture(Eigen::Index n, int d, int m) {
  datagen::MixSpec spec;
  spec.n = n;
  spec.d = d;
  spec.m = m;
  return datagen::sample_bss(spec);
}

struct Prepared {
  datagen::BssSample sample;
  bss::BssState state;
  bss::SourcePosterior sp;
  bss::SourceCorrelations corr;
};

Prepared prepare(Eigen::Index n, int d, int m) {
  Prepared p{mixture(n, d, m), {}, {}, {}};
  p.state = bss::initialize(p.sample.mix.data, m);
  p.sp.rho = bss::pseudo_inverse_sources(p.sample.mix.data, p.state.a_bar);
  p.sp.gamma = Matrix::Identity(m, m);
  p.corr = bss::update_correlations(p.sample.mix.data, p.sp, p.state);
  return p;
}

void BM_SourceFixedPoint(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto p = prepare(500, 11, m);
  const Vector y = p.sample.mix.data.row(0);
  const Vector init = p.sp.rho.row(0).transpose();
  for (auto _ : state) benchmark::DoNotOptimize(bss::source_fixed_point(y, p.state, p.corr, 500, init));
}
BENCHMARK(BM_SourceFixedPoint)->Arg(1)->Arg(5)->Arg(8);

void BM_SourcePrecision(benchmark::State& state) {
  const auto p = prepare(500, 11, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bss::source_precision(p.state, p.corr, 500));
}
BENCHMARK(BM_SourcePrecision)->Arg(5)->Arg(8);

void BM_UpdateCorrelations(benchmark::State& state) {
  const auto p = prepare(state.range(0), 11, 5);
  for (auto _ : state) benchmark::DoNotOptimize(bss::update_correlations(p.sample.mix.data, p.sp, p.state));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UpdateCorrelations)->Arg(500)->Arg(4000);

void BM_MixingUpdate(benchmark::State& state) {
  const auto p = prepare(4000, 11, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bss::mixing_update(p.corr, p.state.lambdas, 4000));
}
BENCHMARK(BM_MixingUpdate)->Arg(5)->Arg(8);

void BM_BssFreeEnergy(benchmark::State& state) {
  const auto p = prepare(4000, 11, 5);
  for (auto _ : state) benchmark::DoNotOptimize(bss::free_energy(p.sample.mix.data, p.state, p.sp));
}
BENCHMARK(BM_BssFreeEnergy);

void BM_BssInitialize(benchmark::State& state) {
  const auto sample = mixture(4000, 11, 5);
  bss::BssConfig cfg;
  cfg.init = state.range(0) ? bss::InitMode::ica : bss::InitMode::pca;
  for (auto _ : state) benchmark::DoNotOptimize(bss::initialize(sample.mix.data, 5, cfg));
}
BENCHMARK(BM_BssInitialize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BssFit(benchmark::State& state) {
  const auto sample = mixture(state.range(0), 6, 3);
  bss::BssConfig cfg;
  cfg.update_lambda = true;
  for (auto _ : state) benchmark::DoNotOptimize(bss::fit(sample.mix.data, 3, cfg));
}
BENCHMARK(BM_BssFit)->Arg(500)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_AlignSources(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const Matrix truth = datagen::sample_logistic_sources(4000, m, 1);
  const Matrix estimate = truth.rowwise().reverse();
  for (auto _ : state) benchmark::DoNotOptimize(bss::align_sources(estimate, truth));
}
BENCHMARK(BM_AlignSources)->Arg(5)->Arg(8);

}  // namespace
