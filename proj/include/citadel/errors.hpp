#pragma once

#include <stdexcept>
#include <string>

namespace citadel {

// Each error family maps to one CLI exit code (see exit_code()).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input vector or matrix does not match the model's expected dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value produced for one object was handed to another (e.g. a forward
// trace from a different architecture).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Precondition violated by the caller (empty batch, empty labeled set, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

// Translates the exception currently being handled into an exit code.
// Must be called from inside a catch block.
ExitCode exit_code_for_current_exception() noexcept;

}  // namespace citadel
