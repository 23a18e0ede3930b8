#include "vbl/vbbss.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>

#include "vbl/error.hpp"

namespace vbl::bss {

namespace {

constexpr double kSourceVariance = std::numbers::pi * std::numbers::pi / 3.0;

double log_cosh_half(double x) {
  const double u = std::abs(0.5 * x);
  return u + std::log1p(std::exp(-2.0 * u)) - std::numbers::ln2;
}

void require_data(const Dataset& data) {
  if (data.size() < 1 || data.dim() < 1) throw InvalidArgument("bss: empty dataset");
  if (!data.values.allFinite()) throw InvalidArgument("bss: data contain non-finite values");
}

void require_state(const BssState& s, int d) {
  const int m = s.sources();
  if (s.sensors() != d || m < 1) throw InvalidArgument("bss: mixing matrix shape mismatch");
  if (static_cast<int>(s.sigma_blocks.size()) != d || s.lambdas.size() != d) {
    throw InvalidArgument("bss: state has inconsistent sensor count");
  }
  for (const auto& b : s.sigma_blocks) {
    if (b.rows() != m || b.cols() != m) throw InvalidArgument("bss: Sigma block shape mismatch");
  }
  if (!(s.alpha > 0.0) || !(s.lambdas.array() > 0.0).all()) {
    throw InvalidArgument("bss: alpha and noise precisions must be positive");
  }
}

void require_correlations(const SourceCorrelations& c, int d, int m) {
  if (c.c_yx.rows() != d || c.c_yx.cols() != m || c.c_xx.rows() != m || c.c_xx.cols() != m ||
      static_cast<int>(c.c_xx_i.size()) != d) {
    throw InvalidArgument("bss: correlation shapes mismatch");
  }
}

SourceCorrelations initial_correlations(const BssState& state, Eigen::Index n) {
  SourceCorrelations c;
  const int m = state.sources();
  c.c_xx = kSourceVariance * Matrix::Identity(m, m);
  c.c_yx = kSourceVariance * state.a_bar;
  set_ridge(c, state.alpha, state.lambdas, n);
  return c;
}

}  // namespace

double log_source_density(const Eigen::Ref<const Vector>& x) {
  double v = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) v -= std::log(4.0) + 2.0 * log_cosh_half(x(j));
  return v;
}

double jensen_bound(const Eigen::Ref<const Vector>& rho, const Eigen::Ref<const Matrix>& gamma) {
  if (gamma.rows() != rho.size() || gamma.cols() != rho.size()) {
    throw InvalidArgument("jensen_bound: dimension mismatch");
  }
  return log_source_density(rho) - 0.25 * linalg::inverse_spd(gamma).trace();
}

Matrix mixing_correction(const SourceCorrelations& corr, Eigen::Index n_data) {
  if (n_data < 1) throw InvalidArgument("bss: N must be >= 1");
  const auto m = corr.c_xx.rows();
  Matrix out = Matrix::Zero(m, m);
  for (const auto& c : corr.c_xx_i) out += linalg::inverse_spd(c);
  return out / static_cast<double>(n_data);
}

Matrix source_precision(const BssState& state, const SourceCorrelations& corr, Eigen::Index n_data) {
  require_correlations(corr, state.sensors(), state.sources());
  const int m = state.sources();
  Matrix g = state.a_bar.transpose() * state.lambdas.asDiagonal() * state.a_bar;
  g += 0.5 * Matrix::Identity(m, m);
  g += mixing_correction(corr, n_data);
  return linalg::symmetrize(g);
}

namespace {

// Newton solver for b - M rho - tanh(rho / 2) = 0 with M symmetric positive definite.
Vector solve_fixed_point(const Vector& b, const Matrix& mm, Vector rho, const FixedPointConfig& cfg) {
  const auto m = rho.size();
  const double scale = std::max(1.0, b.norm());
  auto residual = [&](const Vector& r) -> Vector {
    return b - mm * r - (0.5 * r.array()).tanh().matrix();
  };
  auto objective = [&](const Vector& r) {
    double v = b.dot(r) - 0.5 * r.dot(mm * r);
    for (Eigen::Index j = 0; j < m; ++j) v -= 2.0 * log_cosh_half(r(j));
    return v;
  };
  Vector res = residual(rho);
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double rn = res.norm();
    if (rn <= cfg.tol * scale) return rho;
    Matrix h = mm;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = 1.0 / std::cosh(0.5 * rho(j));
      h(j, j) += 0.5 * c * c;
    }
    const Vector step = h.llt().solve(res);
    Vector next = rho + step;
    if (rn > 1e-6 * scale) {
      const double f0 = objective(rho);
      const double slope = res.dot(step);
      double eta = 1.0;
      while (objective(next) < f0 + 1e-4 * eta * slope && eta > 1e-12) {
        eta *= 0.5;
        next = rho + eta * step;
      }
    }
    rho = std::move(next);
    res = residual(rho);
  }
  const double rn = res.norm();
  if (rn <= cfg.tol * scale) return rho;
  throw ConvergenceError("source_fixed_point: no convergence", cfg.max_iter, rn);
}

Matrix fixed_point_matrix(const BssState& state, const SourceCorrelations& corr, Eigen::Index n_data) {
  return linalg::symmetrize(state.a_bar.transpose() * state.lambdas.asDiagonal() * state.a_bar +
                            mixing_correction(corr, n_data));
}

}  // namespace

Vector source_fixed_point(const Eigen::Ref<const Vector>& y, const BssState& state, const SourceCorrelations& corr,
                          Eigen::Index n_data, const Eigen::Ref<const Vector>& rho_init,
                          const FixedPointConfig& cfg) {
  const int m = state.sources();
  if (y.size() != state.sensors() || rho_init.size() != m) throw InvalidArgument("source_fixed_point: shape mismatch");
  require_correlations(corr, state.sensors(), m);
  if (!rho_init.allFinite()) throw InvalidArgument("source_fixed_point: non-finite initial value");
  const Vector b = state.a_bar.transpose() * (state.lambdas.asDiagonal() * y);
  return solve_fixed_point(b, fixed_point_matrix(state, corr, n_data), rho_init, cfg);
}

Matrix pseudo_inverse_sources(const Dataset& data, const Matrix& a_bar) {
  if (a_bar.rows() != data.dim()) throw InvalidArgument("pseudo_inverse_sources: shape mismatch");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a_bar);
  return cod.solve(data.values.transpose()).transpose();
}

SourceCorrelations update_correlations(const Dataset& data, const SourcePosterior& sp, const BssState& state) {
  require_data(data);
  require_state(state, data.dim());
  const auto n = data.size();
  if (sp.rho.rows() != n || sp.rho.cols() != state.sources()) {
    throw InvalidArgument("update_correlations: source posterior shape mismatch");
  }
  SourceCorrelations c;
  const double inv_n = 1.0 / static_cast<double>(n);
  c.c_yx = data.values.transpose() * sp.rho * inv_n;
  c.c_xx = linalg::symmetrize(sp.rho.transpose() * sp.rho * inv_n + linalg::inverse_spd(sp.gamma));
  set_ridge(c, state.alpha, state.lambdas, n);
  return c;
}

void set_ridge(SourceCorrelations& corr, double alpha, const Vector& lambdas, Eigen::Index n_data) {
  if (!(alpha >= 0.0) || !(lambdas.array() > 0.0).all() || n_data < 1) {
    throw InvalidArgument("set_ridge: alpha >= 0, lambdas > 0 and N >= 1 required");
  }
  const auto m = corr.c_xx.rows();
  corr.c_xx_i.clear();
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    corr.c_xx_i.push_back(corr.c_xx + alpha / (lambdas(i) * static_cast<double>(n_data)) * Matrix::Identity(m, m));
  }
}

MixingPosterior mixing_update(const SourceCorrelations& corr, const Vector& lambdas, Eigen::Index n_data) {
  const auto d = corr.c_yx.rows();
  require_correlations(corr, static_cast<int>(d), static_cast<int>(corr.c_yx.cols()));
  if (lambdas.size() != d || n_data < 1) throw InvalidArgument("mixing_update: lambdas or N invalid");
  MixingPosterior out;
  out.a_bar.resize(d, corr.c_yx.cols());
  for (Eigen::Index i = 0; i < d; ++i) {
    const Matrix inv = linalg::inverse_spd(corr.c_xx_i[i]);
    out.a_bar.row(i) = corr.c_yx.row(i) * inv;
    out.sigma_blocks.push_back(inv / (lambdas(i) * static_cast<double>(n_data)));
  }
  return out;
}

AlphaUpdate alpha_update(const BssState& state, AlphaMode mode) {
  double second = state.a_bar.squaredNorm();
  for (const auto& b : state.sigma_blocks) second += b.trace();
  const double dm = static_cast<double>(state.sensors()) * state.sources();
  if (mode == AlphaMode::printed) {
    const double a = second / dm;
    if (!(a > 0.0) || !std::isfinite(a)) throw NumericalError("alpha_update: printed form is not positive");
    return {a, false};
  }
  if (!(second > dm / kPrecisionCap)) return {kPrecisionCap, true};
  return {dm / second, false};
}

namespace {

// sum_n E[(y_ni - a_i^T x_n)^2] for every sensor.
Vector expected_residuals(const Dataset& data, const SourcePosterior& sp, const BssState& state) {
  const auto n = static_cast<double>(data.size());
  const Matrix s = linalg::inverse_spd(sp.gamma);
  const Matrix cxx = sp.rho.transpose() * sp.rho / n + s;
  const Matrix diff = data.values - sp.rho * state.a_bar.transpose();
  Vector r(state.sensors());
  for (int i = 0; i < state.sensors(); ++i) {
    const Vector a = state.a_bar.row(i).transpose();
    r(i) = diff.col(i).squaredNorm() + n * a.dot(s * a) + n * (state.sigma_blocks[i].cwiseProduct(cxx)).sum();
  }
  return r;
}

}  // namespace

Vector lambda_update(const Dataset& data, const SourcePosterior& sp, const BssState& state) {
  require_data(data);
  require_state(state, data.dim());
  const Vector r = expected_residuals(data, sp, state);
  const auto n = static_cast<double>(data.size());
  Vector out(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) out(i) = r(i) > n / kPrecisionCap ? n / r(i) : kPrecisionCap;
  return out;
}

FreeEnergyReport free_energy(const Dataset& data, const BssState& state, const SourcePosterior& sp) {
  require_data(data);
  require_state(state, data.dim());
  const int d = state.sensors();
  const int m = state.sources();
  const auto n = static_cast<double>(data.size());
  if (sp.rho.rows() != data.size() || sp.rho.cols() != m || sp.gamma.rows() != m) {
    throw InvalidArgument("bss free_energy: source posterior shape mismatch");
  }
  const Vector r = expected_residuals(data, sp, state);
  double loglik = 0.0;
  for (int i = 0; i < d; ++i) {
    loglik += 0.5 * n * std::log(state.lambdas(i) / (2.0 * std::numbers::pi)) - 0.5 * state.lambdas(i) * r(i);
  }
  const Matrix s = linalg::inverse_spd(sp.gamma);
  double prior_bound = -n * (m * std::log(4.0) + 0.25 * s.trace());
  for (Eigen::Index k = 0; k < sp.rho.rows(); ++k) {
    for (int j = 0; j < m; ++j) prior_bound -= 2.0 * log_cosh_half(sp.rho(k, j));
  }
  const double entropy = n * (0.5 * m * std::log(2.0 * std::numbers::pi * std::numbers::e) -
                              0.5 * linalg::logdet_spd(sp.gamma));
  double kl = 0.0;
  for (int i = 0; i < d; ++i) {
    const auto& b = state.sigma_blocks[i];
    kl += 0.5 * (state.alpha * (b.trace() + state.a_bar.row(i).squaredNorm()) - m - m * std::log(state.alpha) -
                 linalg::logdet_spd(b));
  }
  const std::pair<const char*, double> parts[] = {
      {"log likelihood", loglik}, {"source prior bound", prior_bound}, {"entropy", entropy}, {"KL", kl}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NumericalError(std::string("bss free_energy: non-finite ") + name);
  }
  return FreeEnergyReport::from_terms(loglik + prior_bound + entropy, kl);
}

namespace {

// Orthogonal W with rows maximizing the tanh contrast of W z; z has identity covariance.
Matrix fast_ica_rotation(const Matrix& z, int max_iter) {
  const auto m = z.cols();
  const auto n = static_cast<double>(z.rows());
  Matrix w = Matrix::Identity(m, m);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix g = (z * w.transpose()).array().tanh().matrix();
    const Vector slope = (1.0 - g.array().square()).colwise().mean().transpose();
    Matrix next = g.transpose() * z / n - slope.asDiagonal() * w;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(next * next.transpose());
    const Vector ev = eig.eigenvalues().cwiseMax(1e-300);
    next = eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose() * next;
    const double change = (1.0 - (next * w.transpose()).diagonal().cwiseAbs().array()).abs().maxCoeff();
    w = std::move(next);
    if (change < 1e-10) break;
  }
  return w;
}

}  // namespace

BssState initialize(const Dataset& data, int m, const BssConfig& cfg) {
  require_data(data);
  const int d = data.dim();
  const auto n = data.size();
  if (m < 1) throw InvalidArgument("bss initialize: m must be >= 1");
  BssState s;
  s.alpha = cfg.alpha_init;
  if (cfg.lambdas) {
    if (cfg.lambdas->size() != d || !(cfg.lambdas->array() > 0.0).all()) {
      throw InvalidArgument("bss initialize: configured lambdas must be d positive values");
    }
    s.lambdas = *cfg.lambdas;
  } else {
    if (n < 2) throw InvalidArgument("bss initialize: two rows needed to estimate noise precisions");
    const Matrix centered = data.values.rowwise() - data.values.colwise().mean();
    const Vector var = centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
    if (!(var.array() > 0.0).all()) throw InvalidArgument("bss initialize: a sensor has zero variance");
    s.lambdas = var.cwiseInverse();
  }
  if (!(s.alpha > 0.0)) throw InvalidArgument("bss initialize: alpha must be positive");

  const Matrix second = data.values.transpose() * data.values / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(second);
  const int k = std::min(m, d);
  const double floor = std::max(eig.eigenvalues()(d - 1) * 1e-12, 1e-300);
  Matrix basis(d, k);  // principal directions scaled by their standard deviations
  for (int j = 0; j < k; ++j) {
    basis.col(j) = eig.eigenvectors().col(d - 1 - j) * std::sqrt(std::max(eig.eigenvalues()(d - 1 - j), floor));
  }
  if (cfg.init == InitMode::ica && k > 1) {
    const Matrix whitened = data.values * basis * (basis.transpose() * basis).inverse();
    basis = basis * fast_ica_rotation(whitened, cfg.ica_max_iter).transpose();
  }
  s.a_bar.resize(d, m);
  s.a_bar.leftCols(k) = basis / std::sqrt(kSourceVariance);
  for (int j = k; j < m; ++j) {
    s.a_bar.col(j) = Vector::Unit(d, (j - d) % d) * std::sqrt(std::max(eig.eigenvalues()(0), floor) / kSourceVariance) * 0.1;
  }
  for (int i = 0; i < d; ++i) {
    const double p = s.lambdas(i) * static_cast<double>(n) * kSourceVariance + s.alpha;
    s.sigma_blocks.push_back(Matrix::Identity(m, m) / p);
  }
  return s;
}

namespace {

SourcePosterior e_step(const Dataset& data, const BssState& state, const SourceCorrelations& corr,
                       const Matrix& rho_init, const FixedPointConfig& cfg) {
  SourcePosterior sp;
  sp.gamma = source_precision(state, corr, data.size());
  const Matrix mm = fixed_point_matrix(state, corr, data.size());
  const Matrix b = data.values * state.lambdas.asDiagonal() * state.a_bar;  // row n = (a_bar^T Lambda y_n)^T
  sp.rho.resize(data.size(), state.sources());
  for (Eigen::Index k = 0; k < data.size(); ++k) {
    sp.rho.row(k) = solve_fixed_point(b.row(k).transpose(), mm, rho_init.row(k).transpose(), cfg).transpose();
  }
  return sp;
}

}  // namespace

BssFit fit(const Dataset& data, int m, const BssConfig& cfg) {
  require_data(data);
  if (m < 1) throw InvalidArgument("bss fit: m must be >= 1");
  if (data.size() < m) throw InvalidArgument("bss fit: N must be >= m");
  if (cfg.max_iter < 1) throw InvalidArgument("bss fit: max_iter must be >= 1");
  const auto n = data.size();

  BssFit out;
  out.state = initialize(data, m, cfg);
  out.correlations = initial_correlations(out.state, n);
  Matrix rho = pseudo_inverse_sources(data, out.state.a_bar);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iter; ++it) {
    out.sources = e_step(data, out.state, out.correlations, rho, cfg.fixed_point);
    rho = out.sources.rho;

    SourceCorrelations corr = update_correlations(data, out.sources, out.state);
    MixingPosterior mix = mixing_update(corr, out.state.lambdas, n);
    out.state.a_bar = std::move(mix.a_bar);
    out.state.sigma_blocks = std::move(mix.sigma_blocks);
    const AlphaUpdate au = alpha_update(out.state, cfg.alpha_mode);
    out.state.alpha = au.alpha;
    if (au.capped) ++out.alpha_caps;
    if (cfg.update_lambda) out.state.lambdas = lambda_update(data, out.sources, out.state);
    set_ridge(corr, out.state.alpha, out.state.lambdas, n);
    mix = mixing_update(corr, out.state.lambdas, n);
    out.state.a_bar = std::move(mix.a_bar);
    out.state.sigma_blocks = std::move(mix.sigma_blocks);
    out.correlations = std::move(corr);

    const FreeEnergyReport report = free_energy(data, out.state, out.sources);
    out.energy.likelihood_term = report.likelihood_term;
    out.energy.kl_term = report.kl_term;
    out.energy.total = report.total;
    out.energy.trace.push_back(report.total);
    out.iterations = it;
    const double f = report.total;
    if (it > 1) {
      const double scale = std::max(1.0, std::abs(prev));
      if (cfg.alpha_mode == AlphaMode::stationary && f < prev - cfg.monotone_tol * scale) {
        throw ConvergenceError("bss fit: free energy decreased at iteration " + std::to_string(it), it, prev - f);
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

FitAllResult fit_all(const Dataset& data, int K, const BssConfig& cfg) {
  if (K < 1) throw InvalidArgument("bss fit_all: K must be >= 1");
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
  if (ms.empty()) throw ConvergenceError("bss fit_all: every structure failed: " + errors.front(), 0, 0.0);
  out.posterior = structure_log_posterior(ms, fs, flat_log_prior(K, ms.size()));
  return out;
}

Matrix reconstruct_sources(const BssFit& fitted) { return fitted.sources.rho; }

Matrix reconstruct_sources(const BssFit& fitted, const Dataset& data, const FixedPointConfig& cfg) {
  require_data(data);
  if (data.dim() != fitted.state.sensors()) throw InvalidArgument("reconstruct_sources: sensor count mismatch");
  const auto& st = fitted.state;
  const auto n = static_cast<double>(data.size());
  // q(A) fixed: per-sensor correlations chosen so the correction sums to sum_i lambda_i Sigma_i.
  SourceCorrelations corr;
  corr.c_yx = Matrix::Zero(st.sensors(), st.sources());
  corr.c_xx = Matrix::Zero(st.sources(), st.sources());
  for (int i = 0; i < st.sensors(); ++i) corr.c_xx_i.push_back(linalg::inverse_spd(st.lambdas(i) * n * st.sigma_blocks[i]));
  const Matrix init = pseudo_inverse_sources(data, st.a_bar);
  return e_step(data, st, corr, init, cfg).rho;
}

Alignment align_sources(const Matrix& estimate, const Matrix& truth) {
  const auto m = truth.cols();
  if (estimate.cols() != m || estimate.rows() != truth.rows() || m < 1) {
    throw InvalidArgument("align_sources: shape mismatch");
  }
  if (m > 9) throw InvalidArgument("align_sources: at most 9 sources");
  const double total = truth.squaredNorm();
  if (!(total > 0.0)) throw InvalidArgument("align_sources: truth is identically zero");
  // cost(i, j): squared error of estimate column i, best-signed, against truth column j
  Matrix cost(m, m);
  Eigen::MatrixXi sign(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = estimate.col(i).dot(truth.col(j));
      sign(i, j) = c < 0.0 ? -1 : 1;
      cost(i, j) = estimate.col(i).squaredNorm() + truth.col(j).squaredNorm() - 2.0 * std::abs(c);
    }
  }
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) c += cost(perm[j], j);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Alignment a;
  a.permutation = best;
  a.relative_error = std::max(best_cost, 0.0) / total;
  for (Eigen::Index j = 0; j < m; ++j) a.signs.push_back(sign(best[j], j));
  return a;
}

}  // namespace vbl::bss
