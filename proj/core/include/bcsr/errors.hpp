#pragma once

#include <stdexcept>
#include <string>

namespace bcsr {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on a function argument was violated.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed under its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An experiment configuration is malformed. `path()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A numerical solve failed (singular system, non-finite values, ...).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A data-structure invariant or an orchestration guard failed.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace bcsr
