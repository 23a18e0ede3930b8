#pragma once

namespace vbl {

// Digamma function. Shifts x above 6 with the recurrence psi(x) = psi(x+1) - 1/x
// and evaluates the asymptotic series there. Absolute error <= 1e-12 for x >= 1e-6.
// Throws DomainError for x <= 0 or NaN.
double digamma(double x);

// Trigamma function, same scheme as digamma.
double trigamma(double x);

// log of the multivariate gamma function Gamma_d(x), x > (d-1)/2.
double log_multigamma(double x, int d);

// Multivariate digamma sum_{i=1..d} psi(x + (1-i)/2).
double multi_digamma(double x, int d);

}  // namespace vbl
