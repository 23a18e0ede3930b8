#include "vbl/linalg.hpp"

#include <cmath>

#include "vbl/error.hpp"

namespace vbl::linalg {

Matrix symmetrize(const Eigen::Ref<const Matrix>& a) {
  return 0.5 * (a + a.transpose());
}

bool is_spd(const Eigen::Ref<const Matrix>& a, double tol) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  if (!a.allFinite()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::LLT<Matrix> llt(symmetrize(a));
  return llt.info() == Eigen::Success;
}

bool is_psd(const Eigen::Ref<const Matrix>& a, double tol) {
  if (a.rows() != a.cols() || a.rows() == 0) return false;
  if (!a.allFinite()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  return ev.minCoeff() >= -tol * top;
}

double logdet_spd(const Eigen::Ref<const Matrix>& a) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("logdet_spd: matrix is not positive definite");
  }
  const Matrix& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Matrix inverse_spd(const Eigen::Ref<const Matrix>& a) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("inverse_spd: matrix is not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

Matrix inverse_spd_jitter(const Eigen::Ref<const Matrix>& a, double rel_jitter) {
  Matrix s = symmetrize(a);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    const double jitter = rel_jitter * s.trace() / static_cast<double>(s.rows());
    s.diagonal().array() += jitter;
    llt.compute(s);
    if (llt.info() != Eigen::Success || !(jitter > 0.0)) {
      throw NumericalError("inverse_spd_jitter: matrix is singular even after jitter");
    }
  }
  return symmetrize(llt.solve(Matrix::Identity(s.rows(), s.cols())));
}

Vector solve_spd(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& b) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("solve_spd: matrix is not positive definite");
  }
  return llt.solve(b);
}

}  // namespace vbl::linalg
