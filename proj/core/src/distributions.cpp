#include "vbl/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vbl/error.hpp"
#include "vbl/special.hpp"

namespace vbl::dist {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

// KL terms below are differences of large numbers; exact zero at q == p is restored by
// clamping tiny negative round-off.
double clamp_kl(double v) { return v < 0.0 && v > -1e-12 ? 0.0 : v; }

}  // namespace

DirichletParams::DirichletParams(Vector l) : lambdas(std::move(l)) {
  if (lambdas.size() < 1) throw InvalidArgument("DirichletParams: dimension must be >= 1");
  if (!(lambdas.array() > 0.0).all() || !lambdas.allFinite()) {
    throw InvalidArgument("DirichletParams: all lambdas must be positive and finite");
  }
}

WishartParams::WishartParams(double shape, Matrix rate) : a(shape), B(std::move(rate)) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("WishartParams: shape must be > 0");
  if (!linalg::is_spd(B)) throw InvalidArgument("WishartParams: B must be symmetric positive definite");
}

NormalParams::NormalParams(Vector mean, Matrix prec) : mu(std::move(mean)), precision(std::move(prec)) {
  require_same_dim(mu.size(), precision.rows(), "NormalParams");
  if (!linalg::is_spd(precision)) {
    throw InvalidArgument("NormalParams: precision must be symmetric positive definite");
  }
}

NormalWishartParams::NormalWishartParams(double dof_, Matrix rate, Vector location, double beta_)
    : dof(dof_), B(std::move(rate)), xi(std::move(location)), beta(beta_) {
  require_same_dim(xi.size(), B.rows(), "NormalWishartParams");
  if (!(dof > static_cast<double>(dim()) - 1.0)) {
    throw InvalidArgument("NormalWishartParams: dof must exceed d - 1");
  }
  if (!(beta > 0.0)) throw InvalidArgument("NormalWishartParams: beta must be > 0");
  if (!linalg::is_spd(B)) throw InvalidArgument("NormalWishartParams: B must be symmetric positive definite");
}

WishartParams NormalWishartParams::precision_marginal() const {
  return WishartParams(0.5 * (dof - dim() + 1.0), B);
}

Vector dirichlet_geometric_mean(const DirichletParams& p) {
  const double psi_sum = digamma(p.lambdas.sum());
  Vector out(p.dim());
  for (Eigen::Index s = 0; s < p.dim(); ++s) out(s) = std::exp(digamma(p.lambdas(s)) - psi_sum);
  return out;
}

Vector dirichlet_mean(const DirichletParams& p) { return p.lambdas / p.lambdas.sum(); }

double wishart_geometric_mean_det(const WishartParams& p) {
  return std::exp(p.dim() * digamma(p.a) - linalg::logdet_spd(p.B));
}

double wishart_expected_logdet(const WishartParams& p) {
  const int d = p.dim();
  return multi_digamma(p.a + 0.5 * (d - 1), d) - linalg::logdet_spd(p.B);
}

Matrix wishart_mean(const WishartParams& p) {
  return (p.a + 0.5 * (p.dim() - 1)) * linalg::inverse_spd(p.B);
}

double wishart_log_normalizer(const WishartParams& p) {
  const double h = p.a + 0.5 * (p.dim() - 1);
  return log_multigamma(h, p.dim()) - h * linalg::logdet_spd(p.B);
}

double wishart_entropy(const WishartParams& p) {
  const double h = p.a + 0.5 * (p.dim() - 1);
  return -(p.a - 1.0) * wishart_expected_logdet(p) + h * p.dim() + wishart_log_normalizer(p);
}

double normal_entropy(const NormalParams& p) {
  return 0.5 * p.dim() * std::log(2.0 * std::numbers::pi * std::numbers::e) -
         0.5 * linalg::logdet_spd(p.precision);
}

DirichletParams dirichlet_update(const DirichletParams& prior, const Eigen::Ref<const Vector>& soft_counts) {
  require_same_dim(prior.dim(), soft_counts.size(), "dirichlet_update");
  if ((soft_counts.array() < 0.0).any() || !soft_counts.allFinite()) {
    throw InvalidArgument("dirichlet_update: soft counts must be finite and nonnegative");
  }
  return DirichletParams(prior.lambdas + soft_counts);
}

NormalWishartParams normal_wishart_update(const NormalWishartParams& prior, double weight,
                                          const Eigen::Ref<const Vector>& first_moment,
                                          const Eigen::Ref<const Matrix>& scatter) {
  require_same_dim(prior.dim(), first_moment.size(), "normal_wishart_update");
  require_same_dim(prior.dim(), scatter.rows(), "normal_wishart_update");
  require_same_dim(scatter.rows(), scatter.cols(), "normal_wishart_update");
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw InvalidArgument("normal_wishart_update: weight must be finite and >= 0");
  }
  if (weight == 0.0) return prior;
  if (!linalg::is_psd(scatter)) {
    throw InvalidArgument("normal_wishart_update: scatter must be symmetric positive semi-definite");
  }
  const double beta_post = prior.beta + weight;
  const Vector diff = first_moment - prior.xi;
  const Matrix b1 = 0.5 * (scatter / weight + (prior.beta / beta_post) * diff * diff.transpose());
  return NormalWishartParams(prior.dof + weight, linalg::symmetrize(prior.B + weight * b1),
                             (prior.beta * prior.xi + weight * first_moment) / beta_post, beta_post);
}

double kl_divergence(const DirichletParams& q, const DirichletParams& p) {
  require_same_dim(q.dim(), p.dim(), "kl_divergence(Dirichlet)");
  const double q0 = q.lambdas.sum();
  const double p0 = p.lambdas.sum();
  const double psi0 = digamma(q0);
  double kl = std::lgamma(q0) - std::lgamma(p0);
  for (Eigen::Index s = 0; s < q.dim(); ++s) {
    kl += std::lgamma(p.lambdas(s)) - std::lgamma(q.lambdas(s)) +
          (q.lambdas(s) - p.lambdas(s)) * (digamma(q.lambdas(s)) - psi0);
  }
  return clamp_kl(kl);
}

double kl_divergence(const WishartParams& q, const WishartParams& p) {
  require_same_dim(q.dim(), p.dim(), "kl_divergence(Wishart)");
  const int d = q.dim();
  const double hq = q.a + 0.5 * (d - 1);
  // E_q[Tr((B_q - B_p) G)] = h_q Tr((B_q - B_p) B_q^-1) = h_q (d - Tr(B_p B_q^-1))
  const Matrix bq_inv = linalg::inverse_spd(q.B);
  const double trace_term = hq * (d - (p.B * bq_inv).trace());
  const double kl = (q.a - p.a) * wishart_expected_logdet(q) - trace_term - wishart_log_normalizer(q) +
                    wishart_log_normalizer(p);
  return clamp_kl(kl);
}

double kl_divergence(const NormalParams& q, const NormalParams& p) {
  require_same_dim(q.dim(), p.dim(), "kl_divergence(Normal)");
  const Matrix q_cov = linalg::inverse_spd(q.precision);
  const Vector diff = p.mu - q.mu;
  const double kl = 0.5 * ((p.precision * q_cov).trace() + diff.dot(p.precision * diff) - q.dim() +
                           linalg::logdet_spd(q.precision) - linalg::logdet_spd(p.precision));
  return clamp_kl(kl);
}

double kl_divergence(const NormalWishartParams& q, const NormalWishartParams& p) {
  require_same_dim(q.dim(), p.dim(), "kl_divergence(NormalWishart)");
  const int d = q.dim();
  const WishartParams wq = q.precision_marginal();
  const double kl_w = kl_divergence(wq, p.precision_marginal());
  const Vector diff = q.xi - p.xi;
  const double kl_n = 0.5 * (d * p.beta / q.beta + p.beta * diff.dot(wishart_mean(wq) * diff) - d +
                             d * std::log(q.beta / p.beta));
  return clamp_kl(kl_w + kl_n);
}

}  // namespace vbl::dist
