#pragma once

#include <stdexcept>
#include <string>

namespace changeblind {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value lies outside the domain an operation accepts (out-of-range pixel,
/// non-finite number, |r| >= 1, ...).
class InputDomainError : public Error {
 public:
  using Error::Error;
};

/// Shapes or dimensions of the inputs do not agree.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Inputs are well-formed but violate a precondition (empty set, too few
/// samples, degenerate data, unknown ids).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Correlation requested on a zero-variance input.
class UndefinedCorrelationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Design matrix or covariance is rank deficient.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A write would violate a uniqueness constraint (duplicate submission).
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// File system or decoding failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace changeblind
