#pragma once

#include <stdexcept>
#include <string>

namespace dbar {

/// Root of every error raised by the engine. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when an attack's query budget is spent. Attack drivers catch it
/// and finish with a partial report.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class UpdateRejected : public Error {
 public:
  using Error::Error;
};

/// The benign input is not classified as its label (or the pool has no usable member).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class OracleUnreachable : public Error {
 public:
  using Error::Error;
};

class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace dbar
