#pragma once

#include <stdexcept>
#include <string>

namespace npfkit {

// Every npfkit failure derives from Error so callers can catch one base.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& location, const std::string& message)
      : Error(location.empty() ? message : location + ": " + message), location_(location) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class EquilibriumError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class DiagonalizabilityError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class InfeasiblePlanError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

/// A requested computation needs more memory than the configured limit.
/// This is the user-facing "memory-fail" condition.
class MemoryLimitError : public Error {
 public:
  using Error::Error;
};

/// The engine exceeded its own workspace budget. Always a bug.
class InternalMemoryError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public InputError {
 public:
  using InputError::InputError;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace npfkit
