// One PASS/FAIL line per acceptance criterion. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "direct_formulas.hpp"
#include "evidence.hpp"
#include "ml_em.hpp"
#include "quadrature.hpp"
#include "vbl/datagen.hpp"
#include "vbl/ensemble.hpp"
#include "vbl/vbbss.hpp"
#include "vbl/vbgmm.hpp"

namespace {

using namespace vbl;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---- GMM structure selection ------------------------------------------------------------

Outcome three_cluster_selection() {
  int hits = 0;
  double slowest = 0.0;
  std::ostringstream picks;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t0 = Clock::now();
    const Dataset data = datagen::sample_gmm(datagen::three_cluster_spec(seed)).data;
    gmm::FitConfig cfg;
    cfg.seed = seed;
    cfg.parallel = false;
    const int m = map_structure(gmm::fit_all(data, 10, cfg).posterior);
    slowest = std::max(slowest, seconds_since(t0));
    if (m == 3) ++hits;
    picks << (seed ? "," : "") << m;
  }
  return {hits >= 9 && slowest < 60.0,
          format("MAP m=3 in %d/10 seeds (picks %s), slowest seed %.1f s", hits, picks.str().c_str(), slowest)};
}

Outcome spiral_selection() {
  bool pass = true;
  std::ostringstream out;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    int picks[2];
    int k = 0;
    for (double noise : {0.5, 0.25}) {
      datagen::SpiralSpec spec;
      spec.noise = noise;
      spec.seed = seed;
      gmm::FitConfig cfg;
      cfg.seed = seed;
      cfg.parallel = false;
      picks[k++] = map_structure(gmm::fit_all(datagen::sample_spiral(spec), 20, cfg).posterior);
    }
    const bool ok = picks[0] >= 8 && picks[0] <= 14 && picks[1] > picks[0];
    pass = pass && ok;
    out << (seed ? "; " : "") << "seed " << seed << ": m=" << picks[0] << " at sigma 0.5, m=" << picks[1] << " at 0.25";
  }
  return {pass, out.str()};
}

// ---- source separation ------------------------------------------------------------------

bss::BssConfig separation_config() {
  bss::BssConfig cfg;
  cfg.update_lambda = true;
  return cfg;
}

// MAP fits of the separation runs, kept for the bound-quality check.
std::vector<bss::BssFit> separation_fits;

Outcome separation_selection() {
  int hits = 0;
  double slowest = 0.0;
  std::ostringstream picks;
  separation_fits.clear();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t0 = Clock::now();
    datagen::MixSpec spec;
    spec.seed = seed;
    const auto sample = datagen::sample_bss(spec);
    auto all = bss::fit_all(sample.mix.data, 8, separation_config());
    const int m = map_structure(all.posterior);
    slowest = std::max(slowest, seconds_since(t0));
    if (m == 5) ++hits;
    picks << (seed ? "," : "") << m;
    separation_fits.push_back(std::move(*all.fits[static_cast<std::size_t>(m - 1)]));
    std::fprintf(stderr, "  separation seed %llu: m=%d (%.0f s)\n", static_cast<unsigned long long>(seed), m,
                 seconds_since(t0));
  }
  return {hits >= 8 && slowest < 300.0,
          format("MAP m=5 in %d/10 seeds (picks %s), slowest seed %.0f s", hits, picks.str().c_str(), slowest)};
}

Outcome error_versus_snr() {
  std::vector<double> errors;
  std::ostringstream out;
  for (double snr : {0.0, 10.0, 20.0, 30.0}) {
    datagen::MixSpec spec;
    spec.snr_db = snr;
    const auto sample = datagen::sample_bss(spec);
    const auto fitted = bss::fit(sample.mix.data, spec.m, separation_config());
    const double e = std::log10(bss::align_sources(fitted.sources.rho, sample.sources).relative_error);
    out << (errors.empty() ? "" : ", ") << format("%g dB: %.3f", snr, e);
    errors.push_back(e);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < errors.size(); ++i) decreasing = decreasing && errors[i] < errors[i - 1];
  return {decreasing, "log10 relative error " + out.str()};
}

Outcome bound_quality() {
  if (separation_fits.empty()) return {false, "needs the fits of criterion 3 (run it first)"};
  datagen::Rng rng(505);
  double total_rel = 0.0;
  int violations = 0;
  const int draws = 100;
  for (int k = 0; k < draws; ++k) {
    const auto& fit = separation_fits[static_cast<std::size_t>(k) % separation_fits.size()];
    const Eigen::Index row = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(fit.sources.rho.rows())));
    const Vector rho = fit.sources.rho.row(row).transpose();
    const Matrix& gamma = fit.sources.gamma;
    const Matrix cov = gamma.inverse();
    double truth = 0.0;
    for (Eigen::Index j = 0; j < rho.size(); ++j) truth += oracle::expected_logistic_log_density(rho(j), cov(j, j));
    const double bound = bss::jensen_bound(rho, gamma);
    if (bound > truth) ++violations;
    total_rel += std::abs(bound - truth) / std::abs(truth);
  }
  const double mean_rel = total_rel / draws;
  return {violations == 0 && mean_rel < 0.05,
          format("%d/%d draws above truth, mean relative error %.3f%%", violations, draws, 100.0 * mean_rel)};
}

// ---- free-energy properties -------------------------------------------------------------

int count_decreases(const std::vector<double>& trace) {
  int bad = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - 1e-8 * std::max(1.0, std::abs(trace[i - 1]))) ++bad;
  }
  return bad;
}

Outcome monotone_free_energy() {
  int gmm_bad = 0, bss_bad = 0;
  std::string first;
  for (int i = 0; i < 50; ++i) {
    datagen::Rng rng(6000 + static_cast<std::uint64_t>(i));
    const int d = 1 + static_cast<int>(rng.index(3));
    const int k = 1 + static_cast<int>(rng.index(4));
    const int m = 1 + static_cast<int>(rng.index(8));
    datagen::GmmSpec spec;
    spec.n = 50 + static_cast<Eigen::Index>(rng.index(350));
    spec.seed = 6000 + static_cast<std::uint64_t>(i);
    spec.weights = Vector::Constant(k, 1.0 / k);
    for (int s = 0; s < k; ++s) {
      spec.means.push_back(Vector::NullaryExpr(d, [&] { return 4.0 * rng.normal(); }));
      const Matrix a = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
      spec.covariances.push_back(a * a.transpose() + 0.1 * Matrix::Identity(d, d));
    }
    gmm::FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(i);
    cfg.max_iter = 2000;
    try {
      const int bad = count_decreases(gmm::fit(datagen::sample_gmm(spec).data, m, cfg).energy.trace);
      gmm_bad += bad;
      if (bad && first.empty()) first = format("gmm instance %d", i);
    } catch (const std::exception& e) {
      ++gmm_bad;
      if (first.empty()) first = format("gmm instance %d: %s", i, e.what());
    }
  }
  for (int i = 0; i < 50; ++i) {
    datagen::Rng rng(7000 + static_cast<std::uint64_t>(i));
    datagen::MixSpec spec;
    spec.d = 2 + static_cast<int>(rng.index(5));
    spec.m = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(spec.d)));
    const int m = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(spec.d)));
    spec.n = 50 + static_cast<Eigen::Index>(rng.index(350));
    spec.snr_db = 30.0 * rng.uniform();
    spec.seed = 7000 + static_cast<std::uint64_t>(i);
    bss::BssConfig cfg;
    cfg.monotone_tol = std::numeric_limits<double>::infinity();
    try {
      const int bad = count_decreases(bss::fit(datagen::sample_bss(spec).mix.data, m, cfg).energy.trace);
      bss_bad += bad;
      if (bad && first.empty()) first = format("bss instance %d", i);
    } catch (const std::exception& e) {
      ++bss_bad;
      if (first.empty()) first = format("bss instance %d: %s", i, e.what());
    }
  }
  std::string detail = format("decreasing iterations: %d over 50 GMM fits, %d over 50 BSS fits", gmm_bad, bss_bad);
  if (!first.empty()) detail += " (first: " + first + ")";
  return {gmm_bad == 0 && bss_bad == 0, detail};
}

double evidence_gap(Eigen::Index n, std::uint64_t seed, bool& below) {
  datagen::Rng rng(seed);
  Matrix y(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) y(i, 0) = 1.5 + 2.0 * rng.normal();
  const Dataset data(y);
  const double f = gmm::fit(data, 1).energy.total;
  const auto prior = gmm::Prior::from_data(data);
  const double range = y.maxCoeff() - y.minCoeff();
  const double var = prior.bounds.whitener(0, 0) * prior.bounds.whitener(0, 0);
  const std::vector<double> v(y.data(), y.data() + n);
  const double evidence = oracle::truncated_gaussian_log_evidence(v, y.minCoeff() - 0.1 * range, y.maxCoeff() + 0.1 * range,
                                                                  prior.bounds.lo / var, prior.bounds.hi / var);
  below = below && f <= evidence;
  return evidence - f;
}

Outcome evidence_bound() {
  bool below = true;
  bool shrinks = true;
  std::ostringstream out;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double small = evidence_gap(20, seed, below);
    const double large = evidence_gap(200, seed, below);
    shrinks = shrinks && large < small;
    out << (seed ? ", " : "") << format("%.4f -> %.4f", small, large);
  }
  return {below && shrinks, "log evidence minus F at N=20 -> N=200: " + out.str()};
}

Outcome large_sample_em() {
  const Dataset data = datagen::sample_gmm(datagen::three_cluster_spec(0, 10000)).data;
  const auto init = gmm::initialize(data, 3, 0);
  gmm::FitConfig cfg;
  cfg.tol = 1e-13;
  cfg.max_iter = 5000;
  const auto vb = gmm::fit_from(data, init, gmm::Prior::from_data(data), cfg);
  oracle::MlMixture start;
  start.weights = init.pi_bar;
  for (int s = 0; s < 3; ++s) {
    start.means.push_back(init.mu_bar[s]);
    start.covariances.push_back(init.gamma_bar[s].inverse());
  }
  const auto em = oracle::ml_em(data.values, start);
  double worst = 0.0;
  for (int s = 0; s < 3; ++s) worst = std::max(worst, (vb.stats.mu_bar[s] - em.means[s]).norm() / em.means[s].norm());
  return {vb.stats.alive_count() == 3 && worst < 1e-2, format("largest relative mean difference %.2e", worst)};
}

Outcome duplicate_point_pruning() {
  int ok = 0, total = 0;
  std::string first;
  for (int d = 1; d <= 3; ++d) {
    for (int n : {10, 20, 40}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ++total;
        datagen::Rng rng(seed);
        Matrix y = Matrix::NullaryExpr(n, d, [&] { return rng.normal(); });
        y.row(n - 1) = y.row(0);
        gmm::FitConfig cfg;
        cfg.seed = seed;
        try {
          const auto res = gmm::fit(Dataset(y), n / 2, cfg);
          if (std::isfinite(res.energy.total) && res.stats.alive_count() < n / 2) {
            ++ok;
          } else if (first.empty()) {
            first = format("d=%d N=%d seed %d: alive %d", d, n, static_cast<int>(seed), res.stats.alive_count());
          }
        } catch (const std::exception& e) {
          if (first.empty()) first = format("d=%d N=%d seed %d: %s", d, n, static_cast<int>(seed), e.what());
        }
      }
    }
  }
  std::string detail = format("%d/%d duplicate-point fits finite with pruning", ok, total);
  if (!first.empty()) detail += " (first failure: " + first + ")";
  return {ok == total, detail};
}

// ---- formula transcription --------------------------------------------------------------

double relative(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

Outcome formula_transcription() {
  double e_worst = 0.0, m_worst = 0.0, a_worst = 0.0, g_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    datagen::Rng rng(900 + static_cast<std::uint64_t>(trial));
    const int d = 1 + trial % 3;
    const int m = 1 + trial % 4;
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.index(30));
    const Dataset data(Matrix::NullaryExpr(n, d, [&] { return 3.0 * rng.normal(); }));

    gmm::SuffStats st;
    st.pi_bar = Vector::NullaryExpr(m, [&] { return 0.2 + rng.uniform(); });
    st.pi_bar /= st.pi_bar.sum();
    st.alive.assign(static_cast<std::size_t>(m), 1);
    for (int s = 0; s < m; ++s) {
      st.mu_bar.push_back(Vector::NullaryExpr(d, [&] { return 2.0 * rng.normal(); }));
      const Matrix a = Matrix::NullaryExpr(d, d, [&] { return rng.normal(); });
      st.gamma_bar.push_back(a * a.transpose() + 0.5 * Matrix::Identity(d, d));
    }
    const Matrix r = gmm::e_step(data, st, n);
    e_worst = std::max(e_worst, relative(r, oracle::gmm_responsibilities(data.values, st.pi_bar, st.mu_bar, st.gamma_bar)));

    // m_step on responsibilities with every column carrying more than one point
    Matrix w = Matrix::NullaryExpr(n, m, [&] { return 0.5 + rng.uniform(); });
    w = w.array().colwise() / w.rowwise().sum().array();
    const auto ms = gmm::m_step(data, w);
    const auto expected = oracle::gmm_m_step(data.values, w);
    m_worst = std::max(m_worst, relative(ms.pi_bar, expected.pi));
    for (int s = 0; s < m; ++s) {
      m_worst = std::max(m_worst, relative(ms.mu_bar[static_cast<std::size_t>(s)], expected.mu[static_cast<std::size_t>(s)]));
      m_worst = std::max(m_worst, relative(ms.gamma_bar[static_cast<std::size_t>(s)], expected.gamma[static_cast<std::size_t>(s)]));
    }

    bss::BssState state;
    const int sensors = d + 1;
    state.a_bar = Matrix::NullaryExpr(sensors, m, [&] { return rng.normal(); });
    for (int i = 0; i < sensors; ++i) state.sigma_blocks.push_back(Matrix::Identity(m, m) / 40.0);
    state.alpha = 0.3 + rng.uniform();
    state.lambdas = Vector::NullaryExpr(sensors, [&] { return 0.5 + rng.uniform(); });
    const Dataset mixed(Matrix::NullaryExpr(n, sensors, [&] { return rng.normal(); }));
    bss::SourcePosterior sp;
    sp.rho = Matrix::NullaryExpr(n, m, [&] { return rng.normal(); });
    const Matrix b = Matrix::NullaryExpr(m, m, [&] { return rng.normal(); });
    sp.gamma = b * b.transpose() + Matrix::Identity(m, m);
    const auto corr = bss::update_correlations(mixed, sp, state);
    const auto mix = bss::mixing_update(corr, state.lambdas, n);
    const auto mix_expected = oracle::bss_mixing(mixed.values, sp.rho, sp.gamma, state.alpha, state.lambdas);
    a_worst = std::max(a_worst, relative(mix.a_bar, mix_expected.a));
    for (int i = 0; i < sensors; ++i) {
      a_worst = std::max(a_worst, relative(mix.sigma_blocks[static_cast<std::size_t>(i)], mix_expected.sigma[static_cast<std::size_t>(i)]));
    }
    const Matrix g = bss::source_precision(state, corr, n);
    g_worst = std::max(g_worst, relative(g, oracle::bss_source_precision(state.a_bar, state.lambdas, corr.c_xx, state.alpha,
                                                                         static_cast<double>(n))));
  }
  const double worst = std::max({e_worst, m_worst, a_worst, g_worst});
  return {worst <= 1e-10, format("worst relative differences: e_step %.1e, m_step %.1e, mixing_update %.1e, "
                                 "source_precision %.1e",
                                 e_worst, m_worst, a_worst, g_worst)};
}

Outcome bic_exactness() {
  const struct {
    long k;
    long n;
    double log_prior;
  } cases[] = {{1, 1, 0.0},    {2, 10, -1.5},     {4, 100, 0.0},   {5, 1000, 3.25},  {7, 600, -12.0},
               {12, 4000, 0.5}, {30, 17, -0.125}, {0, 50, 2.0},    {99, 123456, -7.75}, {1000, 2, 1e3}};
  int exact = 0;
  double worst_ulps = 0.0;
  for (const auto& c : cases) {
    const long double expected =
        static_cast<long double>(c.k) / 2.0L * std::log(static_cast<long double>(c.n)) - static_cast<long double>(c.log_prior);
    const double got = bic_penalty(c.k, c.n, c.log_prior);
    const double target = static_cast<double>(expected);
    const double ulp = std::max(std::abs(std::nextafter(target, std::numeric_limits<double>::infinity()) - target),
                                std::numeric_limits<double>::denorm_min());
    const double ulps = std::abs(got - target) / ulp;
    worst_ulps = std::max(worst_ulps, ulps);
    if (ulps <= 2.0) ++exact;
  }
  return {exact == 10, format("%d/10 combinations within 2 ulp of the extended-precision value (worst %.0f ulp)", exact,
                              worst_ulps)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"three-cluster mixture selects m=3", three_cluster_selection},
      {"spiral selection band and noise response", spiral_selection},
      {"separation selects five sources", separation_selection},
      {"reconstruction error falls with SNR", error_versus_snr},
      {"source-prior bound quality", bound_quality},
      {"free energy never decreases", monotone_free_energy},
      {"free energy bounds the exact evidence", evidence_bound},
      {"large-sample agreement with ML-EM", large_sample_em},
      {"duplicated point is pruned, not singular", duplicate_point_pruning},
      {"update formulas match direct evaluation", formula_transcription},
      {"BIC penalty is exact", bic_exactness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.count(5) && !selected.empty()) selected.insert(3);

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
