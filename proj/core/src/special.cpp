#include "vbl/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vbl/error.hpp"

namespace vbl {

namespace {

constexpr double kShift = 10.0;

}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) {
    throw DomainError("digamma: argument must be positive, got " + std::to_string(x));
  }
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ log x - 1/(2x) - sum_k B_{2k} / (2k x^{2k})
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
      inv2 * (1.0 / 120.0 -
      inv2 * (1.0 / 252.0 -
      inv2 * (1.0 / 240.0 -
      inv2 * (1.0 / 132.0 -
      inv2 * (691.0 / 32760.0 -
      inv2 * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) {
    throw DomainError("trigamma: argument must be positive, got " + std::to_string(x));
  }
  double acc = 0.0;
  while (x < kShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  // psi'(x) ~ 1/x + 1/(2x^2) + sum_k B_{2k} / x^{2k+1}
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 + inv * (0.5 +
      inv * (1.0 / 6.0 -
      inv2 * (1.0 / 30.0 -
      inv2 * (1.0 / 42.0 -
      inv2 * (1.0 / 30.0 -
      inv2 * (5.0 / 66.0 -
      inv2 * (691.0 / 2730.0 -
      inv2 * (7.0 / 6.0)))))))));
  return acc + series;
}

double log_multigamma(double x, int d) {
  if (d < 1) throw InvalidArgument("log_multigamma: dimension must be >= 1");
  if (!(x > 0.5 * (d - 1))) {
    throw DomainError("log_multigamma: need x > (d-1)/2");
  }
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) out += std::lgamma(x + 0.5 * (1 - i));
  return out;
}

double multi_digamma(double x, int d) {
  if (d < 1) throw InvalidArgument("multi_digamma: dimension must be >= 1");
  double out = 0.0;
  for (int i = 1; i <= d; ++i) out += digamma(x + 0.5 * (1 - i));
  return out;
}

}  // namespace vbl
