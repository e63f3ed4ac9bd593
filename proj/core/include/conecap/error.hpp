#pragma once

#include <stdexcept>
#include <string>

namespace conecap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad size, out-of-range value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Outer truncation radius too close to the hypersurface.
class InvalidTruncation : public Error {
 public:
  using Error::Error;
};

/// Mean curvature is not positive somewhere, so the Heintze-Karcher bound does not apply.
class NonPositiveCurvature : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Capacities of the truncated problems increased with the truncation radius.
class MonotonicityViolation : public Error {
 public:
  using Error::Error;
};

class FarFieldTooNoisy : public Error {
 public:
  using Error::Error;
};

class MaximumPrincipleViolation : public Error {
 public:
  using Error::Error;
};

/// Scenario configuration could not be parsed or failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace conecap
