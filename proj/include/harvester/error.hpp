#pragma once

#include <stdexcept>
#include <string>

namespace harvester {

enum class ErrorKind {
  Parse,
  Validation,
  InvalidSpec,
  OutOfRange,
  EmptySignal,
  TooShort,
  WindowEmpty,
  NonFinite,
  StepUnderflow,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by parsers; carries the 1-based source line (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(ErrorKind::Parse, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Raised by the integrator when the state stops being finite.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(double last_good_time)
      : Error(ErrorKind::NonFinite,
              "state diverged after t = " + std::to_string(last_good_time) + " s"),
        last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::EmptySignal: return "EmptySignal";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::WindowEmpty: return "WindowEmpty";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
  }
  return "Error";
}

}  // namespace harvester
