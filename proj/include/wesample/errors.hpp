#pragma once

#include <stdexcept>
#include <string>

namespace wesample {

// Raised for malformed experiment configs; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a structural invariant of the method is violated at run time
// (bad allocation, weight bookkeeping, residual totals); CLI exit code 3.
struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a stationary distribution cannot be produced.
struct MixingError : std::runtime_error {
    explicit MixingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wesample
