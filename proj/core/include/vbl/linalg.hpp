#pragma once

#include <Eigen/Dense>

namespace vbl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

// (A + A^T) / 2
Matrix symmetrize(const Eigen::Ref<const Matrix>& a);

// True when `a` is symmetric (to `tol` relative) and its Cholesky factorization succeeds.
bool is_spd(const Eigen::Ref<const Matrix>& a, double tol = 1e-10);

// True when symmetric with all eigenvalues >= -tol * max|eig|.
bool is_psd(const Eigen::Ref<const Matrix>& a, double tol = 1e-10);

// log|A| for symmetric positive-definite A. Throws NumericalError otherwise.
double logdet_spd(const Eigen::Ref<const Matrix>& a);

// Inverse of a symmetric positive-definite matrix via Cholesky.
Matrix inverse_spd(const Eigen::Ref<const Matrix>& a);

// Inverse of a symmetric positive semi-definite matrix. If the Cholesky factorization
// fails, retries once with jitter = rel_jitter * trace(A)/d added to the diagonal.
// Throws NumericalError if still singular.
Matrix inverse_spd_jitter(const Eigen::Ref<const Matrix>& a, double rel_jitter = 1e-9);

// Solve A x = b for symmetric positive-definite A.
Vector solve_spd(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& b);

}  // namespace linalg
}  // namespace vbl
