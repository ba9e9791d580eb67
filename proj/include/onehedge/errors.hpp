#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace onehedge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain.
struct DomainError : Error {
    using Error::Error;
};

// Invalid run configuration (bad grids, censoring rate too high, ...).
struct ConfigError : Error {
    using Error::Error;
};

// A numerical procedure failed to produce a usable result.
struct NumericalError : Error {
    using Error::Error;
};

// Root finding could not bracket a sign change.
struct NoBracket : NumericalError {
    using NumericalError::NumericalError;
};

// A candidate free-boundary solution failed its verification pass.
struct VerificationFailed : NumericalError {
    using NumericalError::NumericalError;
};

// The sign function has more than two crossing roots, so the two-root
// assumption underlying the case analysis fails for these inputs.
struct AssumptionViolated : Error {
    std::vector<double> roots;
    AssumptionViolated(const std::string& msg, std::vector<double> r)
        : Error(msg), roots(std::move(r)) {}
};

// An integral on the half line does not converge for the given parameters.
struct DivergentIntegral : Error {
    using Error::Error;
};

}  // namespace onehedge
