#pragma once

#include <stdexcept>
#include <string>

namespace dualbound {

// Bad or inconsistent user input (config file, CLI flags, parameter ranges).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Correlation matrix failed the Cholesky PSD check.
struct NotPositiveSemiDefinite : std::runtime_error {
    explicit NotPositiveSemiDefinite(const std::string& msg) : std::runtime_error(msg) {}
};

// Exposure-to-weights map is not invertible (degenerate bond loadings).
struct SingularSigma : std::runtime_error {
    explicit SingularSigma(const std::string& msg) : std::runtime_error(msg) {}
};

// A closed-form variance came out negative beyond rounding tolerance.
struct NegativeVariance : std::runtime_error {
    explicit NegativeVariance(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative solver hit its iteration cap without meeting tolerance.
struct NoConvergence : std::runtime_error {
    explicit NoConvergence(const std::string& msg) : std::runtime_error(msg) {}
};

// A bisection could not bracket its root on the allowed interval.
struct BracketError : std::runtime_error {
    explicit BracketError(const std::string& msg) : std::runtime_error(msg) {}
};

// An input lies outside a function's mathematical domain.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dualbound
