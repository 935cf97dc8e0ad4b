#pragma once

#include <stdexcept>
#include <string>

namespace bh {

/// Base of every error raised by the library. Numerical failures derive from
/// NumericalError so callers can separate them from bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// exp(-phi) does not integrate to a finite value on the configured domain.
class NotNormalizable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An integrand produced a non-finite value at a quadrature node.
class EvaluationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularGram : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularInformation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Cholesky failed. `pivot` is the zero-based index of the first leading
/// minor that is not positive.
class NonSpd : public NumericalError {
 public:
  NonSpd(const std::string& what, long pivot)
      : NumericalError(what + " (leading minor " + std::to_string(pivot + 1) + ")"),
        pivot_(pivot) {}
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

/// The estimate produced by an iteration cannot serve as the next measure.
class MeasureInvalid : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bh
