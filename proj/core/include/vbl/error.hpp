#pragma once

#include <stdexcept>
#include <string>

namespace vbl {

/// Invalid argument: wrong dimensions, violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function (e.g. digamma(0)).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Every mixture component has been pruned.
class ModelCollapse : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A non-finite or otherwise unusable intermediate value.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure failed: no convergence, or the free energy decreased.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, int iteration, double residual)
      : std::runtime_error(what), iteration_(iteration), residual_(residual) {}

  int iteration() const noexcept { return iteration_; }
  double residual() const noexcept { return residual_; }

private:
  int iteration_;
  double residual_;
};

}  // namespace vbl
