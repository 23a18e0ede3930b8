#include "vbl/vbgmm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>

#include "vbl/datagen.hpp"
#include "vbl/error.hpp"
#include "vbl/special.hpp"

namespace vbl::gmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double mx = v.maxCoeff();
  if (mx == kNegInf) return kNegInf;
  return mx + std::log((v.array() - mx).exp().sum());
}

Matrix data_covariance(const Matrix& y) {
  const Vector mean = y.colwise().mean().transpose();
  const Matrix centered = y.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(y.rows());
}

void require_data(const Dataset& data) {
  if (data.size() < 1 || data.dim() < 1) throw InvalidArgument("gmm: empty dataset");
  if (!data.values.allFinite()) throw InvalidArgument("gmm: dataset contains non-finite values");
}

void require_stats(const SuffStats& stats, int d) {
  const auto m = static_cast<std::size_t>(stats.components());
  if (m == 0 || stats.mu_bar.size() != m || stats.gamma_bar.size() != m || stats.alive.size() != m) {
    throw InvalidArgument("gmm: inconsistent sufficient statistics");
  }
  if (stats.dim() != d) throw InvalidArgument("gmm: statistics dimension does not match data");
}

// Per-component constants of the E-step that do not depend on the data point.
struct ComponentTerms {
  std::vector<Eigen::LLT<Matrix>> chol;
  Vector offset;  // log pi~ + log|G~|/2 - d/2 log 2 pi - d/(2 N pi_bar)
};

ComponentTerms component_terms(const SuffStats& stats, Eigen::Index n_data) {
  const int m = stats.components();
  const int d = stats.dim();
  const double n = static_cast<double>(n_data);
  ComponentTerms t;
  t.chol.resize(m);
  t.offset = Vector::Constant(m, kNegInf);
  const double psi_total = digamma(n * stats.pi_bar.sum() + m);
  for (int s = 0; s < m; ++s) {
    if (!stats.alive[s]) continue;
    const double ns = n * stats.pi_bar(s);
    if (!(ns > 0.0)) throw NumericalError("gmm e_step: alive component with nonpositive weight");
    t.chol[s].compute(stats.gamma_bar[s]);
    if (t.chol[s].info() != Eigen::Success) throw NumericalError("gmm e_step: precision not positive definite");
    const double logdet_gamma = 2.0 * t.chol[s].matrixLLT().diagonal().array().log().sum();
    const double a = ns / 2.0;
    // log |B|^-1 exp(d psi(a)) with B = a gamma_bar^-1
    const double log_gamma_tilde = d * digamma(a) - (d * std::log(a) - logdet_gamma);
    const double log_pi_tilde = digamma(ns + 1.0) - psi_total;
    t.offset(s) = log_pi_tilde + 0.5 * log_gamma_tilde - 0.5 * d * std::log(2.0 * std::numbers::pi) - d / (2.0 * ns);
  }
  return t;
}

double quad_form(const Eigen::LLT<Matrix>& chol, const Eigen::Ref<const Vector>& diff) {
  // diff^T G diff = |L^T diff|^2
  const Vector z = chol.matrixU() * diff;
  return z.squaredNorm();
}

Matrix log_terms_matrix(const Dataset& data, const SuffStats& stats, Eigen::Index n_data) {
  const auto t = component_terms(stats, n_data);
  const int m = stats.components();
  Matrix out(data.size(), m);
  for (int s = 0; s < m; ++s) {
    if (!stats.alive[s]) {
      out.col(s).setConstant(kNegInf);
      continue;
    }
    const Matrix diff = (data.values.rowwise() - stats.mu_bar[s].transpose()).transpose();
    const Matrix z = t.chol[s].matrixU() * diff;
    out.col(s) = t.offset(s) - 0.5 * z.colwise().squaredNorm().transpose().array();
  }
  return out;
}

// A component died in the M-step but still carries responsibility.
bool has_stale_columns(const SuffStats& stats, const Responsibilities& resp) {
  for (int s = 0; s < stats.components(); ++s) {
    if (!stats.alive[s] && (resp.col(s).array() > 0.0).any()) return true;
  }
  return false;
}

}  // namespace

int SuffStats::alive_count() const {
  return static_cast<int>(std::count(alive.begin(), alive.end(), static_cast<char>(1)));
}

namespace {

// Pfaffian of a skew-symmetric matrix by pivoted elimination.
long double pfaffian(Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> a) {
  const auto n = a.rows();
  long double out = 1.0L;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index piv = k + 1;
    for (Eigen::Index j = k + 2; j < n; ++j) {
      if (std::abs(a(j, k)) > std::abs(a(piv, k))) piv = j;
    }
    if (piv != k + 1) {
      a.row(k + 1).swap(a.row(piv));
      a.col(k + 1).swap(a.col(piv));
      out = -out;
    }
    const long double b = a(k, k + 1);
    if (b == 0.0L) return 0.0L;
    out *= b;
    const Eigen::Index rest = n - k - 2;
    if (rest > 0) {
      const auto c0 = a.row(k).tail(rest).transpose().eval();
      const auto c1 = a.row(k + 1).tail(rest).transpose().eval();
      a.bottomRightCorner(rest, rest) += (c1 * c0.transpose() - c0 * c1.transpose()) / b;
    }
  }
  return out;
}

}  // namespace

double precision_region_log_volume(int d, double lo, double hi) {
  if (d < 1 || !(lo > 0.0) || !(hi > lo)) throw InvalidArgument("gmm prior: invalid precision region");
  // Weyl integration over eigenvalues, then de Bruijn's formula for the ordered integral of
  // det[x_j^(k - (d+3)/2)] over lo < x_1 < ... < x_d < hi.
  using ld = long double;
  const ld a = lo;
  const ld b = hi;
  auto power_integral = [&](ld r) -> ld {
    if (std::abs(r + 1.0L) < 1e-12L) return std::log(b / a);
    return (std::pow(b, r + 1.0L) - std::pow(a, r + 1.0L)) / (r + 1.0L);
  };
  auto ordered_pair = [&](ld p, ld q) -> ld {  // int_{a<x<y<b} x^p y^q
    if (std::abs(p + 1.0L) > 1e-12L) return (power_integral(p + q + 1.0L) - std::pow(a, p + 1.0L) * power_integral(q)) / (p + 1.0L);
    if (std::abs(q + 1.0L) < 1e-12L) return 0.5L * std::pow(std::log(b / a), 2.0L);
    auto f = [&](ld y) { return std::pow(y, q + 1.0L) / (q + 1.0L) * (std::log(y / a) - 1.0L / (q + 1.0L)); };
    return f(b) - f(a);
  };
  const int n = d % 2 == 0 ? d : d + 1;
  Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic> m = Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  std::vector<ld> pw(d);
  for (int k = 0; k < d; ++k) pw[k] = (k + 1) - (d + 3) / 2.0L;
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) m(k, l) = 2.0L * ordered_pair(pw[k], pw[l]) - power_integral(pw[k]) * power_integral(pw[l]);
  }
  if (d % 2 == 1) {
    for (int k = 0; k < d; ++k) {
      m(k, d) = power_integral(pw[k]);
      m(d, k) = -m(k, d);
    }
  }
  const ld pf = pfaffian(m);
  if (!(pf > 0.0L)) throw NumericalError("gmm prior: precision region volume lost to round-off");
  double log_c = d * (d + 1) / 4.0 * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) log_c -= std::lgamma(i / 2.0);
  return log_c + static_cast<double>(std::log(pf));
}

Prior Prior::from_data(const Dataset& data, const PriorConfig& cfg) {
  require_data(data);
  if (!(cfg.mean_box_margin >= 0.0)) throw InvalidArgument("gmm prior: negative mean box margin");
  const int d = data.dim();
  Matrix cov = data_covariance(data.values);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-9 * cov.trace() / d;
    llt.compute(cov);
    if (llt.info() != Eigen::Success || !(cov.trace() > 0.0)) throw NumericalError("gmm prior: degenerate data covariance");
  }
  Prior p;
  p.bounds = {llt.matrixL(), cfg.precision_eig_min, cfg.precision_eig_max};
  const Vector lo = data.values.colwise().minCoeff().transpose();
  const Vector hi = data.values.colwise().maxCoeff().transpose();
  p.log_mean_volume = 0.0;
  for (int j = 0; j < d; ++j) {
    double range = hi(j) - lo(j);
    if (!(range > 0.0)) range = std::sqrt(cov(j, j));
    p.log_mean_volume += std::log(range * (1.0 + 2.0 * cfg.mean_box_margin));
  }
  p.log_precision_volume = precision_region_log_volume(d, cfg.precision_eig_min, cfg.precision_eig_max);
  return p;
}

Posterior posterior(const SuffStats& stats, Eigen::Index n_data) {
  const int m = stats.components();
  const double n = static_cast<double>(n_data);
  Vector lambdas = n * stats.pi_bar.array() + 1.0;
  Posterior out{{}, dist::DirichletParams(lambdas), lambdas / lambdas.sum()};
  out.components.resize(m);
  for (int s = 0; s < m; ++s) {
    if (!stats.alive[s]) continue;
    const double ns = n * stats.pi_bar(s);
    const double a = ns / 2.0;
    out.components[s] = ComponentPosterior{dist::NormalParams(stats.mu_bar[s], ns * stats.gamma_bar[s]),
                                           dist::WishartParams(a, a * linalg::inverse_spd(stats.gamma_bar[s]))};
  }
  return out;
}

Vector log_responsibility_terms(const Eigen::Ref<const Vector>& y, const SuffStats& stats, Eigen::Index n_data) {
  require_stats(stats, static_cast<int>(y.size()));
  const auto t = component_terms(stats, n_data);
  Vector out = t.offset;
  for (int s = 0; s < stats.components(); ++s) {
    if (stats.alive[s]) out(s) -= 0.5 * quad_form(t.chol[s], y - stats.mu_bar[s]);
  }
  return out;
}

Responsibilities e_step(const Dataset& data, const SuffStats& stats, Eigen::Index n_data) {
  require_stats(stats, data.dim());
  if (stats.alive_count() == 0) throw ModelCollapse("gmm e_step: every component has been pruned");
  Matrix logr = log_terms_matrix(data, stats, n_data);
  for (Eigen::Index n = 0; n < logr.rows(); ++n) {
    const double lz = log_sum_exp(logr.row(n).transpose());
    if (!std::isfinite(lz)) throw NumericalError("gmm e_step: non-finite normalizer");
    logr.row(n) = (logr.row(n).array() - lz).exp();
  }
  return logr;
}

SuffStats m_step(const Dataset& data, const Responsibilities& resp, const PrecisionBounds* bounds) {
  require_data(data);
  if (resp.rows() != data.size() || resp.cols() < 1) throw InvalidArgument("gmm m_step: responsibilities shape mismatch");
  const int m = static_cast<int>(resp.cols());
  const int d = data.dim();
  const double n = static_cast<double>(data.size());
  SuffStats out;
  out.pi_bar = resp.colwise().sum().transpose() / n;
  out.mu_bar.assign(m, Vector::Zero(d));
  out.gamma_bar.assign(m, Matrix::Identity(d, d));
  out.alive.assign(m, 0);
  for (int s = 0; s < m; ++s) {
    const double ns = n * out.pi_bar(s);
    if (ns <= 1.0) continue;
    out.alive[s] = 1;
    out.mu_bar[s] = data.values.transpose() * resp.col(s) / ns;
    const Matrix centered = data.values.rowwise() - out.mu_bar[s].transpose();
    const Matrix cov = linalg::symmetrize(centered.transpose() * resp.col(s).asDiagonal() * centered / ns);
    const double shrink = 1.0 - 1.0 / ns;
    if (bounds) {
      // whitened covariance L^-1 C L^-T; precision eigenvalues shrink / eig
      const auto& l = bounds->whitener;
      const Matrix wc = linalg::symmetrize(l.triangularView<Eigen::Lower>().solve(
          l.triangularView<Eigen::Lower>().solve(cov).transpose()));
      Eigen::SelfAdjointEigenSolver<Matrix> es(wc);
      Vector prec(d);
      bool inside = true;
      for (int j = 0; j < d; ++j) {
        const double ev = es.eigenvalues()(j);
        const double g = ev > 0.0 ? shrink / ev : std::numeric_limits<double>::infinity();
        prec(j) = std::clamp(g, bounds->lo, bounds->hi);
        if (prec(j) != g) inside = false;
      }
      if (!inside) {
        const Matrix wg = es.eigenvectors() * prec.asDiagonal() * es.eigenvectors().transpose();
        // G = L^-T wg L^-1
        const Matrix t = l.transpose().triangularView<Eigen::Upper>().solve(wg);
        out.gamma_bar[s] = linalg::symmetrize(l.transpose().triangularView<Eigen::Upper>().solve(t.transpose()));
        continue;
      }
    }
    out.gamma_bar[s] = shrink * linalg::inverse_spd_jitter(cov);
  }
  return out;
}

std::pair<SuffStats, Responsibilities> prune(const SuffStats& stats, const Responsibilities& resp, Eigen::Index n_data) {
  const int m = stats.components();
  if (resp.cols() != m) throw InvalidArgument("gmm prune: responsibilities shape mismatch");
  SuffStats out = stats;
  const double threshold = 1.0 / static_cast<double>(n_data);
  for (int s = 0; s < m; ++s) {
    if (out.alive[s] && out.pi_bar(s) <= threshold) out.alive[s] = 0;
  }
  if (out.alive_count() == 0) throw ModelCollapse("gmm prune: every component would be pruned");
  double total = 0.0;
  for (int s = 0; s < m; ++s) {
    if (!out.alive[s]) out.pi_bar(s) = 0.0;
    total += out.pi_bar(s);
  }
  out.pi_bar /= total;

  Responsibilities r = resp;
  for (int s = 0; s < m; ++s) {
    if (!out.alive[s]) r.col(s).setZero();
  }
  for (Eigen::Index n = 0; n < r.rows(); ++n) {
    const double row = r.row(n).sum();
    if (row > 0.0) {
      r.row(n) /= row;
    } else {
      for (int s = 0; s < m; ++s) r(n, s) = out.alive[s] ? 1.0 / out.alive_count() : 0.0;
    }
  }
  return {std::move(out), std::move(r)};
}

double matched_degrees_of_freedom(double a, int d) {
  if (!(a > 0.0) || d < 1) throw InvalidArgument("matched_degrees_of_freedom: a > 0 and d >= 1 required");
  if (d == 1) return 2.0 * a;
  const double target = d * (digamma(a) - std::log(a));
  auto g = [d](double nu) {
    double v = -d * std::log(nu / 2.0);
    for (int i = 1; i <= d; ++i) v += digamma((nu + 1.0 - i) / 2.0);
    return v;
  };
  auto dg = [d](double nu) {
    double v = -d / nu;
    for (int i = 1; i <= d; ++i) v += 0.5 * trigamma((nu + 1.0 - i) / 2.0);
    return v;
  };
  double lo = d - 1.0;
  double hi = (d + 1.0) * a + d;
  while (g(hi) < target) {
    lo = hi;
    hi *= 2.0;
  }
  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double r = g(nu) - target;
    if (r < 0.0) lo = nu; else hi = nu;
    double next = nu - r / dg(nu);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - nu) <= 1e-15 * nu || hi - lo <= 1e-15 * hi) return next;
    nu = next;
  }
  return nu;
}

dist::WishartParams matched_precision_posterior(const Matrix& gamma_bar, double a) {
  const int d = static_cast<int>(gamma_bar.rows());
  const double nu = matched_degrees_of_freedom(a, d);
  // textbook (nu, V = gamma_bar / nu) -> shape (nu - d + 1)/2, rate (nu/2) gamma_bar^-1
  return dist::WishartParams((nu - (d - 1.0)) / 2.0, nu / 2.0 * linalg::inverse_spd(gamma_bar));
}

double shape_correction(double a, double upper, int d) {
  if (d == 1 || a >= upper) return 0.0;
  // Gauss-Legendre in u = log x
  static const auto rule = [] {
    constexpr int n = 48;
    std::array<std::pair<double, double>, n> r{};
    for (int i = 0; i < n; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      r[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return r;
  }();
  const double lo = std::log(a);
  const double hi = std::log(upper);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (const auto& [node, weight] : rule) {
    const double x = std::exp(mid + half * node);
    const double slope = d * (trigamma(x) - 1.0 / x);
    sum += weight * (matched_degrees_of_freedom(x, d) / 2.0 - x) * slope * x;
  }
  return half * sum;
}

FreeEnergyReport free_energy(const Dataset& data, const SuffStats& stats, const Responsibilities& resp,
                             const Prior& prior) {
  require_stats(stats, data.dim());
  if (resp.rows() != data.size() || resp.cols() != stats.components()) {
    throw InvalidArgument("gmm free_energy: responsibilities shape mismatch");
  }
  const int m = stats.components();
  const int d = data.dim();
  const double n = static_cast<double>(data.size());
  const Matrix logt = log_terms_matrix(data, stats, data.size());

  double expected = 0.0;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    for (int s = 0; s < m; ++s) {
      const double r = resp(i, s);
      if (r <= 0.0) continue;
      if (!stats.alive[s]) throw InvalidArgument("gmm free_energy: responsibility on a pruned component");
      expected += r * logt(i, s);
      entropy -= r * std::log(r);
    }
  }
  const double likelihood = expected + entropy;
  if (!std::isfinite(likelihood)) throw NumericalError("gmm free_energy: non-finite likelihood term");

  const Vector lambdas = n * stats.pi_bar.array() + 1.0;
  double kl = dist::kl_divergence(dist::DirichletParams(lambdas), dist::DirichletParams(Vector::Ones(m)));
  if (!std::isfinite(kl)) throw NumericalError("gmm free_energy: non-finite weight KL");
  for (int s = 0; s < m; ++s) {
    if (!stats.alive[s]) continue;
    const double ns = n * stats.pi_bar(s);
    const double kl_mean =
        -dist::normal_entropy(dist::NormalParams(stats.mu_bar[s], ns * stats.gamma_bar[s])) + prior.log_mean_volume;
    const auto q = matched_precision_posterior(stats.gamma_bar[s], ns / 2.0);
    const double kl_prec = -dist::wishart_entropy(q) + prior.log_precision_volume +
                           0.5 * (d + 1) * dist::wishart_expected_logdet(q) + shape_correction(ns / 2.0, n / 2.0, d);
    if (!std::isfinite(kl_mean)) throw NumericalError("gmm free_energy: non-finite mean KL");
    if (!std::isfinite(kl_prec)) throw NumericalError("gmm free_energy: non-finite precision KL");
    kl += kl_mean + kl_prec;
  }
  return FreeEnergyReport::from_terms(likelihood, kl);
}

SuffStats initialize(const Dataset& data, int m, std::uint64_t seed) {
  require_data(data);
  if (m < 1) throw InvalidArgument("gmm initialize: m must be >= 1");
  const auto n = data.size();
  const int d = data.dim();
  datagen::Rng rng(seed);
  SuffStats s;
  s.pi_bar = Vector::Constant(m, 1.0 / m);
  s.alive.assign(m, 1);
  s.gamma_bar.assign(m, linalg::inverse_spd_jitter(data_covariance(data.values)));

  Vector dist2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(static_cast<std::size_t>(n));
  for (int k = 0; k < m; ++k) {
    if (k > 0) {
      const double total = dist2.sum();
      pick = total > 0.0 ? rng.categorical(dist2) : rng.index(static_cast<std::size_t>(n));
    }
    s.mu_bar.push_back(data.values.row(static_cast<Eigen::Index>(pick)).transpose());
    dist2 = dist2.cwiseMin((data.values.rowwise() - s.mu_bar.back().transpose()).rowwise().squaredNorm());
  }
  (void)d;
  return s;
}

FitResult fit_from(const Dataset& data, SuffStats init, const Prior& prior, const FitConfig& cfg) {
  require_data(data);
  require_stats(init, data.dim());
  if (data.size() < 2) throw InvalidArgument("gmm fit: at least two data points required");
  if (cfg.max_iter < 1) throw InvalidArgument("gmm fit: max_iter must be >= 1");
  const auto n = data.size();

  FitResult out;
  out.requested_components = init.components();
  out.stats = std::move(init);
  double prev = kNegInf;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const int alive_before = out.stats.alive_count();
    Responsibilities resp = e_step(data, out.stats, n);
    SuffStats next = m_step(data, resp, &prior.bounds);
    while (has_stale_columns(next, resp)) {
      resp = prune(next, resp, n).second;
      next = m_step(data, resp, &prior.bounds);
    }
    out.stats = std::move(next);
    out.resp = std::move(resp);
    auto report = free_energy(data, out.stats, out.resp, prior);
    out.energy.likelihood_term = report.likelihood_term;
    out.energy.kl_term = report.kl_term;
    out.energy.total = report.total;
    out.energy.trace.push_back(report.total);
    out.iterations = it;
    const double f = report.total;
    const int removed = alive_before - out.stats.alive_count();
    if (removed > 0) out.prune_events.push_back({it, removed, it > 1 ? f - prev : 0.0});
    if (it > 1) {
      const double scale = std::max(1.0, std::abs(prev));
      if (removed == 0 && f < prev - cfg.monotone_tol * scale) {
        throw ConvergenceError("gmm fit: free energy decreased at iteration " + std::to_string(it), it, prev - f);
      }
      if (std::abs(f - prev) <= cfg.tol * std::abs(f)) {
        out.converged = true;
        break;
      }
    }
    prev = f;
  }
  return out;
}

FitResult fit(const Dataset& data, int m, const FitConfig& cfg) {
  require_data(data);
  if (data.size() < 2) throw InvalidArgument("gmm fit: at least two data points required");
  const Prior prior = Prior::from_data(data, cfg.prior);
  const int restarts = std::max(1, cfg.restarts);
  std::optional<FitResult> best;
  std::exception_ptr last_error;
  for (int r = 0; r < restarts; ++r) {
    try {
      auto res = fit_from(data, initialize(data, m, datagen::derive_seed(cfg.seed, r)), prior, cfg);
      if (!best || res.energy.total > best->energy.total) best = std::move(res);
    } catch (const ConvergenceError&) {
      throw;
    } catch (...) {
      last_error = std::current_exception();
    }
  }
  if (!best) std::rethrow_exception(last_error);
  return std::move(*best);
}

FitAllResult fit_all(const Dataset& data, int K, const FitConfig& cfg) {
  if (K < 1) throw InvalidArgument("gmm fit_all: K must be >= 1");
  FitAllResult out;
  out.fits.resize(K);
  std::vector<std::string> errors(K);
  auto run = [&](int m) {
    try {
      out.fits[m - 1] = fit(data, m, cfg);
    } catch (const std::exception& e) {
      errors[m - 1] = e.what();
    }
  };
  if (cfg.parallel && K > 1) {
    std::vector<std::future<void>> jobs;
    for (int m = 1; m <= K; ++m) jobs.push_back(std::async(std::launch::async, run, m));
    for (auto& j : jobs) j.get();
  } else {
    for (int m = 1; m <= K; ++m) run(m);
  }
  std::vector<int> ms;
  std::vector<double> fs;
  for (int m = 1; m <= K; ++m) {
    if (out.fits[m - 1]) {
      ms.push_back(m);
      fs.push_back(out.fits[m - 1]->energy.total);
    } else {
      out.warnings.push_back({m, errors[m - 1]});
    }
  }
  if (ms.empty()) throw ModelCollapse("gmm fit_all: every structure failed: " + errors.front());
  out.posterior = structure_log_posterior(ms, fs, flat_log_prior(K, ms.size()));
  return out;
}

int classify(const SuffStats& stats, Eigen::Index n_data, const Eigen::Ref<const Vector>& y) {
  const Vector t = log_responsibility_terms(y, stats, n_data);
  int best = -1;
  for (int s = 0; s < t.size(); ++s) {
    if (!stats.alive[s]) continue;
    if (best < 0 || t(s) > t(best)) best = s;
  }
  if (best < 0) throw ModelCollapse("gmm classify: no alive component");
  return best;
}

Model::Model(Dataset data, FitResult result, FitConfig cfg)
    : data_(std::move(data)), result_(std::move(result)), cfg_(std::move(cfg)), prior_(Prior::from_data(data_, cfg_.prior)) {}

Model::Model(Dataset data, FitResult result, FitConfig cfg, Prior prior)
    : data_(std::move(data)), result_(std::move(result)), cfg_(std::move(cfg)), prior_(prior) {}

double Model::augmented_free_energy(const Vector& y, const RefitConfig& rc) const {
  if (y.size() != data_.dim()) throw InvalidArgument("gmm predictive: query dimension mismatch");
  Dataset augmented(Matrix(data_.size() + 1, data_.dim()), data_.columns);
  augmented.values.topRows(data_.size()) = data_.values;
  augmented.values.row(data_.size()) = y.transpose();
  FitConfig c = cfg_;
  c.max_iter = rc.max_iter;
  c.tol = rc.tol;
  return fit_from(augmented, result_.stats, prior_, c).energy.total;
}

double Model::point_free_energy(const Vector& y) const {
  return log_sum_exp(log_responsibility_terms(y, result_.stats, data_.size()));
}

int Model::classify(const Vector& y) const { return gmm::classify(result_.stats, data_.size(), y); }

}  // namespace vbl::gmm
