#pragma once

#include <stdexcept>
#include <string>

namespace gsp {

inline constexpr const char* kVersion = "0.1.0";

// Numerical routine ran out of budget before reaching its tolerance.
// Mapped to CLI exit code 1.
struct NonConvergence : std::runtime_error {
    explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

// Parameter outside the domain of an operation.  Mapped to CLI exit code 2.
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// A checked mathematical invariant failed (e.g. a membership sample violated
// its bound).  Mapped to CLI exit code 3.
struct InvariantViolation : std::runtime_error {
    explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gsp
