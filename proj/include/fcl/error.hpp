#pragma once

#include <stdexcept>
#include <string>

namespace fcl {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input is well-typed but numerically unusable (zero norm, empty set, ...).
class DegenerateInput : public Error {
public:
  using Error::Error;
};

class ShapeMismatch : public Error {
public:
  using Error::Error;
};

class NonFinite : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Encoder backend could not be created or failed during a forward pass.
class BackendError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Configuration violates the schema. `path()` names the offending field
/// in JSON-pointer-like dotted form, e.g. `$.explore.rho`.
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

}  // namespace fcl
