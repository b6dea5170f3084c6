#pragma once
// Exception types shared across the library.
//
// ConfigError means the caller supplied invalid arguments or configuration
// (the CLI maps it to exit code 2). ComputeError and its subclasses mean a
// numerical procedure failed on valid inputs (exit code 1).

#include <stdexcept>
#include <string>

namespace labelshift {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct ComputeError : Error {
  explicit ComputeError(const std::string& msg) : Error(msg) {}
};

// Kernel regression denominator fell below the machine-safe floor.
struct DegenerateQueryError : ComputeError {
  explicit DegenerateQueryError(const std::string& msg) : ComputeError(msg) {}
};

// Quadrature mass check failed: the integration interval truncates too much
// of the conditional density.
struct TruncationError : ComputeError {
  explicit TruncationError(const std::string& msg) : ComputeError(msg) {}
};

// Iterative solver diverged.
struct DivergenceError : ComputeError {
  explicit DivergenceError(const std::string& msg) : ComputeError(msg) {}
};

}  // namespace labelshift
