#pragma once

// Adaptive Gauss-Kronrod expectations of the logistic source log-density.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace oracle {

// log(cosh(x/2)^-2 / 4), evaluated without overflow.
inline double logistic_log_density(double x) {
  const double a = std::abs(x);
  return -a - 2.0 * std::log1p(std::exp(-a));
}

// E[logistic_log_density(x)] for x ~ N(mean, var).
inline double expected_logistic_log_density(double mean, double var) {
  const double sd = std::sqrt(var);
  const double pi = 3.14159265358979323846;
  auto f = [&](double z) {
    return logistic_log_density(mean + sd * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -14.0, 14.0, 15, 1e-13);
}

}  // namespace oracle
