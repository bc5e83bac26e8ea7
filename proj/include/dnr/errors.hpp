#pragma once

#include <stdexcept>
#include <string>

namespace dnr {

/// Base class for all toolkit failures.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid grid/experiment configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Mismatched shapes between fields or grids.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Boundary or initial data violating a compatibility condition.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Invalid numerical parameter (rho, omega, xi, ...).
struct ParameterError : Error {
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

/// Linear system could not be solved to tolerance.
struct SolverError : Error {
    explicit SolverError(const std::string& msg) : Error(msg) {}
};

/// Newton iteration failed to converge.
struct NonlinearSolverError : Error {
    NonlinearSolverError(const std::string& msg, double residual)
        : Error(msg), last_residual(residual) {}
    double last_residual;
};

/// Audit could not run (too few samples, bad sweep, ...).
struct AuditError : Error {
    explicit AuditError(const std::string& msg) : Error(msg) {}
};

/// Field failed the discrete curl-free test.
struct NotCurlFreeError : Error {
    NotCurlFreeError(const std::string& msg, double res)
        : Error(msg), residual(res) {}
    double residual;
};

/// Ray-transform inversion left the principal branch.
struct BranchError : Error {
    explicit BranchError(const std::string& msg) : Error(msg) {}
};

/// Frequency lattice misses a required slice.
struct CoverageError : Error {
    explicit CoverageError(const std::string& msg) : Error(msg) {}
};

/// Quasi-linear model violates a required hypothesis.
struct ModelClassError : Error {
    explicit ModelClassError(const std::string& msg) : Error(msg) {}
};

/// Analytic test preset violates its side conditions.
struct PresetError : Error {
    explicit PresetError(const std::string& msg) : Error(msg) {}
};

}  // namespace dnr
