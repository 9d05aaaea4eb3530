#pragma once

#include <stdexcept>
#include <string>

namespace pspi {

/// Malformed model text or an invalid model definition.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
    ModelError(const std::string& msg, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

    /// 1-based line number, 0 when the error is not tied to a line.
    int line() const noexcept { return line_; }

private:
    int line_ = 0;
};

/// A valuation that is incomplete or not graph-preserving.
class ValuationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double residual)
        : std::runtime_error(msg + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Failure to launch or talk to an external SMT solver.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pspi
