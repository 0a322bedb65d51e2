#pragma once

#include <stdexcept>
#include <string>

namespace ggom {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kValidation = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Bad flags, conflicting configuration, malformed config documents.
class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

// Input data or parameters that violate a structural invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

// Degenerate or ill-conditioned numerics (singular vertex block, zero rows).
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace ggom
