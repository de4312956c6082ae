#pragma once

#include <stdexcept>
#include <string>

namespace lateach {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A constraint set (LP, polytope or halfspace estimate) admits no point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Loss of numerical accuracy that the algorithm cannot recover from.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace lateach
