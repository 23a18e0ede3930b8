#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vbl/dataset.hpp"
#include "vbl/ensemble.hpp"
#include "vbl/linalg.hpp"

namespace vbl::bss {

// Noisy linear mixing y = A x + u with d sensors and m logistic sources,
// p(x_j) = cosh^-2(x_j / 2) / 4, noise precisions lambda_i, and A_ij ~ N(0, 1/alpha).
// Posteriors: q(x_n) = N(rho_n, gamma^-1), q(A) = N(a_bar, Sigma) with one m x m block per row of A.

struct BssState {
  Matrix a_bar;                     // d x m
  std::vector<Matrix> sigma_blocks;  // covariance of row i of A
  double alpha = 1.0;
  Vector lambdas;                   // d noise precisions

  int sensors() const { return static_cast<int>(a_bar.rows()); }
  int sources() const { return static_cast<int>(a_bar.cols()); }
};

struct SourcePosterior {
  Matrix rho;    // N x m posterior means
  Matrix gamma;  // m x m precision shared by every instance
};

struct SourceCorrelations {
  Matrix c_yx;                  // sum_n y_n rho_n^T / N
  Matrix c_xx;                  // sum_n (rho_n rho_n^T + gamma^-1) / N
  std::vector<Matrix> c_xx_i;   // c_xx + alpha / (lambda_i N) I
};

struct MixingPosterior {
  Matrix a_bar;
  std::vector<Matrix> sigma_blocks;
};

enum class AlphaMode { stationary, printed };

// pca: principal directions only. ica: principal directions rotated by symmetric FastICA
// (tanh contrast, started from the identity) on the whitened projection.
enum class InitMode { pca, ica };

struct FixedPointConfig {
  double tol = 1e-8;  // on |residual|, relative to max(1, |a_bar^T Lambda y|)
  int max_iter = 100;
};

struct AlphaUpdate {
  double alpha;
  bool capped;
};

inline constexpr double kPrecisionCap = 1e12;

// log p(x) = sum_j [-log 4 - 2 log cosh(x_j / 2)].
double log_source_density(const Eigen::Ref<const Vector>& x);

// Lower bound on E[log p(x)] for x ~ N(rho, gamma^-1):
// -m log 4 - Tr(gamma^-1) / 4 - 2 sum_j log cosh(rho_j / 2).
double jensen_bound(const Eigen::Ref<const Vector>& rho, const Eigen::Ref<const Matrix>& gamma);

// sum_i (C^i_xx)^-1 / N
Matrix mixing_correction(const SourceCorrelations& corr, Eigen::Index n_data);

// a_bar^T Lambda a_bar + I / 2 + sum_i (C^i_xx)^-1 / N
Matrix source_precision(const BssState& state, const SourceCorrelations& corr, Eigen::Index n_data);

// Solves a_bar^T Lambda (y - a_bar rho) - tanh(rho / 2) = sum_i (C^i_xx)^-1 / N rho by damped Newton
// steps on the concave objective whose gradient this is. Throws ConvergenceError with the residual.
Vector source_fixed_point(const Eigen::Ref<const Vector>& y, const BssState& state, const SourceCorrelations& corr,
                          Eigen::Index n_data, const Eigen::Ref<const Vector>& rho_init,
                          const FixedPointConfig& cfg = {});

// Least-squares sources (a_bar^T a_bar)^-1 a_bar^T y per row, via a rank-revealing decomposition.
Matrix pseudo_inverse_sources(const Dataset& data, const Matrix& a_bar);

SourceCorrelations update_correlations(const Dataset& data, const SourcePosterior& sp, const BssState& state);

// Rebuilds c_xx_i from c_xx for new hyperparameters.
void set_ridge(SourceCorrelations& corr, double alpha, const Vector& lambdas, Eigen::Index n_data);

// Row i of a_bar = (row i of c_yx) (C^i_xx)^-1, block i = (C^i_xx)^-1 / (lambda_i N).
MixingPosterior mixing_update(const SourceCorrelations& corr, const Vector& lambdas, Eigen::Index n_data);

// stationary: d m / (Tr a_bar^T a_bar + sum_i Tr Sigma_i), capped at kPrecisionCap.
// printed:    (Tr a_bar^T a_bar + sum_i Tr Sigma_i) / (d m).
AlphaUpdate alpha_update(const BssState& state, AlphaMode mode);

// lambda_i = N / sum_n E[(y_ni - a_i^T x_n)^2], capped at kPrecisionCap.
Vector lambda_update(const Dataset& data, const SourcePosterior& sp, const BssState& state);

// Expected log likelihood plus the source-prior bound and the q(x) entropy, minus KL[q(A) || p(A | alpha)].
FreeEnergyReport free_energy(const Dataset& data, const BssState& state, const SourcePosterior& sp);

struct BssConfig {
  int max_iter = 2000;
  double tol = 1e-8;
  double monotone_tol = 1e-8;
  AlphaMode alpha_mode = AlphaMode::stationary;
  bool update_lambda = false;
  std::optional<Vector> lambdas;  // default: 1 / sample variance of each sensor
  double alpha_init = 1.0;
  InitMode init = InitMode::ica;
  int ica_max_iter = 500;
  FixedPointConfig fixed_point;
  bool parallel = true;
};

// a_bar from the top principal directions of the second-moment matrix (optionally rotated, see
// InitMode), scaled for sources of logistic variance var_x = pi^2 / 3;
// Sigma_i = I / (lambda_i N var_x + alpha).
BssState initialize(const Dataset& data, int m, const BssConfig& cfg = {});

struct BssFit {
  BssState state;
  SourcePosterior sources;
  SourceCorrelations correlations;
  FreeEnergyReport energy;
  int iterations = 0;
  bool converged = false;
  int alpha_caps = 0;
};

// E-step: gamma, then rho_n for every n (warm-started). M-step: q(A), alpha, optionally lambda,
// then q(A) again so that q(A) is optimal for the final hyperparameters.
BssFit fit(const Dataset& data, int m, const BssConfig& cfg = {});

struct FitWarning {
  int m;
  std::string message;
};

struct FitAllResult {
  StructurePosterior posterior;
  std::vector<std::optional<BssFit>> fits;  // index m-1
  std::vector<FitWarning> warnings;
};

FitAllResult fit_all(const Dataset& data, int K, const BssConfig& cfg = {});

// Posterior modes rho_n for the training data.
Matrix reconstruct_sources(const BssFit& fitted);

// Posterior modes for new data under the fitted q(A). Only `state` is read.
Matrix reconstruct_sources(const BssFit& fitted, const Dataset& data, const FixedPointConfig& cfg = {});

struct Alignment {
  std::vector<int> permutation;  // estimate column matched to truth column j
  std::vector<int> signs;
  double relative_error;         // sum |s x_hat - x|^2 / sum |x|^2
};

// Best signed permutation of the estimate columns against the truth columns (exhaustive, m <= 9).
Alignment align_sources(const Matrix& estimate, const Matrix& truth);

}  // namespace vbl::bss
