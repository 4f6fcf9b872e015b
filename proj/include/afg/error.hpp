#pragma once

#include <stdexcept>
#include <string>

namespace afg {

// Base for every error raised by the library. The CLI maps ConfigError,
// DataError and PrerequisiteError to exit code 1, everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file content or a violated type invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage was run before the stage it depends on.
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Tensor shape mismatch or other misuse of the numerics kernel.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace afg
