#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace homeostat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A parameter set violates a model invariant. `field()` names the offender.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The operation needs a model feature the configuration does not provide,
/// e.g. the two-compartment closure under a damage-dependent death profile.
class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

/// Invalid solver or run configuration (CFL violation, bad grid, ...).
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace homeostat
