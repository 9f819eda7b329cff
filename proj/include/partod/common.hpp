#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace partod {

enum class ErrorCode {
    InvalidInput,
    MissingCapacity,
    MissingSpeed,
    InsufficientSamples,
    InvalidPair,
    Inconsistency,
    InvalidAssignment,
    DegenerateNetwork,
    Numerical,
    Precondition,
    Solver,
    Io,
    Config,
};

/// Single exception type used across the library; the code tells callers
/// which contract was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

inline bool is_finite(double x) { return std::isfinite(x); }

} // namespace partod
