#pragma once

#include <stdexcept>
#include <string>

namespace dyncontrol {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Visit times not strictly increasing, negative, or a non-positive step.
class InvalidScheduleError : public Error {
 public:
  using Error::Error;
};

/// Parameter values outside their admissible domain.
class InvalidParamsError : public Error {
 public:
  using Error::Error;
};

/// Sequences that should align with a visit schedule have the wrong length.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// A Gaussian law that must be nondegenerate is singular.
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// A posterior covariance that is not positive semidefinite.
class InvalidPosteriorError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition (mismatched specs, bad sizes).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Quadrature grid too coarse or too narrow to conserve probability mass.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or schema-violating configuration / input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dyncontrol
