#pragma once

#include <stdexcept>
#include <string>

namespace isoflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or interval lies outside the domain of the weight or slab.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A derivative was requested where the weight is not differentiable
/// (piecewise-linear weight evaluated exactly at a knot).
class NonDifferentiableError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// The operation needs omega'' but the weight is only C0.
class SmoothnessError : public Error {
 public:
  using Error::Error;
};

/// Input fails a structural precondition (bad parameters, malformed slab, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inputs are individually valid but cannot be combined.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity violated an invariant that holds for correct input.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Degenerate input for which the requested quantity is undefined.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Precondition of an operation is not met by its (valid) input.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Iterative numerics did not reach the requested tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_estimate, double error_bound)
      : Error(what), best_estimate_(best_estimate), error_bound_(error_bound) {}

  double best_estimate() const noexcept { return best_estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double best_estimate_;
  double error_bound_;
};

}  // namespace isoflow
