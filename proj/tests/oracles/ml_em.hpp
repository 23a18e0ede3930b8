#pragma once

// Ordinary maximum-likelihood EM for a full-covariance Gaussian mixture.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct MlMixture {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  int iterations = 0;
};

inline MlMixture ml_em(const Eigen::MatrixXd& y, MlMixture init, int max_iter = 5000, double tol = 1e-12) {
  const auto n = y.rows();
  const auto d = y.cols();
  const auto m = init.weights.size();
  const double log2pi = std::log(2.0 * 3.14159265358979323846);
  MlMixture cur = std::move(init);
  double prev = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd r(n, m);
  for (int it = 1; it <= max_iter; ++it) {
    double loglik = 0.0;
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> fac;
    std::vector<double> logdet;
    for (Eigen::Index s = 0; s < m; ++s) {
      fac.emplace_back(cur.covariances[s]);
      logdet.push_back(fac.back().vectorD().array().log().sum());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> lp(m);
      for (Eigen::Index s = 0; s < m; ++s) {
        const Eigen::VectorXd diff = y.row(i).transpose() - cur.means[s];
        lp[s] = std::log(cur.weights(s)) - 0.5 * (d * log2pi + logdet[s] + diff.dot(fac[s].solve(diff)));
      }
      const double top = *std::max_element(lp.begin(), lp.end());
      double z = 0.0;
      for (double v : lp) z += std::exp(v - top);
      const double lz = top + std::log(z);
      loglik += lz;
      for (Eigen::Index s = 0; s < m; ++s) r(i, s) = std::exp(lp[s] - lz);
    }
    for (Eigen::Index s = 0; s < m; ++s) {
      const double ns = r.col(s).sum();
      cur.weights(s) = ns / static_cast<double>(n);
      cur.means[s] = y.transpose() * r.col(s) / ns;
      const Eigen::MatrixXd c = y.rowwise() - cur.means[s].transpose();
      cur.covariances[s] = c.transpose() * r.col(s).asDiagonal() * c / ns;
    }
    cur.iterations = it;
    if (std::abs(loglik - prev) <= tol * std::abs(loglik)) break;
    prev = loglik;
  }
  return cur;
}

}  // namespace oracle
