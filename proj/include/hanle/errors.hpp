#pragma once

#include <stdexcept>
#include <string>

namespace hanle {

/// Invalid or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed or produced non-finite values (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The stationary system has no unique solution (e.g. zero in-flight relaxation).
class SingularSystemError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// No narrow central structure could be identified in a resonance curve (CLI exit code 4).
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hanle
