#pragma once

// Conjugate-exponential distribution types and the variational hyperparameter updates.
//
// Parametrizations (all precisions appear un-inverted in the quadratic forms):
//
//   Dirichlet     D(pi; lambda)          ~ prod_s pi_s^(lambda_s - 1)
//   Normal        N(x; mu, P)            ~ exp(-(x-mu)^T P (x-mu) / 2),   P = precision
//   Wishart       W(G; a, B)             ~ |G|^(a-1) exp(-Tr(B G))
//   Normal-Wishart NW(x, G; dof, B, xi, beta) = W(G) N(x; xi, beta G)
//
// The Wishart uses shape `a` and rate `B`. In textbook terms (degrees of freedom nu and
// scale V, density ~ |G|^((nu-d-1)/2) exp(-Tr(V^-1 G)/2)) this is nu = 2a + d - 1 and
// V = (2B)^-1, so E[G] = (a + (d-1)/2) B^-1. For d = 1 it is the Gamma(a, rate B) density.
//
// The Normal-Wishart counts its shape in degrees of freedom: the precision marginal is
// ~ |G|^((dof-d-1)/2) exp(-Tr(B G)), i.e. W(G; (dof-d+1)/2, B). With this convention the
// data update adds the effective count to `dof` and to `beta` alike.

#include <Eigen/Dense>

#include "vbl/linalg.hpp"

namespace vbl::dist {

struct DirichletParams {
  Vector lambdas;

  explicit DirichletParams(Vector l);
  Eigen::Index dim() const { return lambdas.size(); }
};

struct WishartParams {
  double a;
  Matrix B;

  WishartParams(double shape, Matrix rate);
  int dim() const { return static_cast<int>(B.rows()); }
};

struct NormalParams {
  Vector mu;
  Matrix precision;

  NormalParams(Vector mean, Matrix prec);
  int dim() const { return static_cast<int>(mu.size()); }
};

struct NormalWishartParams {
  double dof;
  Matrix B;
  Vector xi;
  double beta;

  NormalWishartParams(double dof_, Matrix rate, Vector location, double beta_);
  int dim() const { return static_cast<int>(xi.size()); }

  // Marginal distribution of the precision.
  WishartParams precision_marginal() const;
};

// exp(E[log pi_s]) = exp(psi(lambda_s) - psi(sum lambda)).
Vector dirichlet_geometric_mean(const DirichletParams& p);

// E[pi_s] = lambda_s / sum lambda.
Vector dirichlet_mean(const DirichletParams& p);

// |B|^-1 exp(d psi(a)). This is the single-shape form used by the mixture E-step; the
// exact geometric mean of |G| is exp(wishart_expected_logdet(p)), which replaces d psi(a)
// by sum_i psi(a + (d-i)/2). The two agree for d = 1.
double wishart_geometric_mean_det(const WishartParams& p);

// E[log|G|] = sum_{i=1..d} psi(a + (d-i)/2) - log|B|.
double wishart_expected_logdet(const WishartParams& p);

// E[G] = (a + (d-1)/2) B^-1.
Matrix wishart_mean(const WishartParams& p);

// Differential entropy of W(a, B).
double wishart_entropy(const WishartParams& p);

// log of the normalizer: integral of |G|^(a-1) exp(-Tr BG) = Gamma_d(a + (d-1)/2) |B|^-(a+(d-1)/2).
double wishart_log_normalizer(const WishartParams& p);

// Differential entropy of N(mu, P): d/2 log(2 pi e) - log|P| / 2.
double normal_entropy(const NormalParams& p);

// Posterior lambda_s = prior lambda_s + soft_count_s.
// Throws InvalidArgument on dimension mismatch or a negative count.
DirichletParams dirichlet_update(const DirichletParams& prior, const Eigen::Ref<const Vector>& soft_counts);

// Conjugate Normal-Wishart update from weighted data summaries.
//
//   weight        w  = sum_n q_n                         (effective count)
//   first_moment  m  = sum_n q_n x_n / w                 (weighted mean)
//   scatter       S  = sum_n q_n (x_n - m)(x_n - m)^T    (weighted scatter about m)
//
// Result:
//   dof'  = dof + w
//   beta' = beta + w
//   xi'   = (beta xi + w m) / (beta + w)
//   B'    = B + w B1,   B1 = [S / w + beta / (beta + w) (m - xi)(m - xi)^T] / 2
//
// Throws InvalidArgument for negative weight, dimension mismatch or non-PSD scatter.
NormalWishartParams normal_wishart_update(const NormalWishartParams& prior, double weight,
                                          const Eigen::Ref<const Vector>& first_moment,
                                          const Eigen::Ref<const Matrix>& scatter);

// Closed-form KL(q || p). All throw InvalidArgument on dimension mismatch.
double kl_divergence(const DirichletParams& q, const DirichletParams& p);
double kl_divergence(const WishartParams& q, const WishartParams& p);
double kl_divergence(const NormalParams& q, const NormalParams& p);
double kl_divergence(const NormalWishartParams& q, const NormalWishartParams& p);

}  // namespace vbl::dist
