#pragma once

#include <stdexcept>
#include <string>

namespace fracevo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the admissible parameter set (e.g. alpha outside (0,1)).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside its domain (poles, negative arguments).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mismatched lengths or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// No evaluation regime could certify the requested tolerance.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// A shifted system (lambda I - A) is singular to working precision.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// The operator lacks a capability the caller needs (e.g. spectral data).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for the requested discrete operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Input data unusable for a fit (non-positive norms, too few points).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A configuration field violates its invariant. `field()` is a dotted path.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& reason)
      : Error(field + ": " + reason), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed configuration or data file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracevo
