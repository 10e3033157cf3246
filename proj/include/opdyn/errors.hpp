#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace opdyn {

/// Bad arguments or unusable inputs (missing files, empty streams, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents; carries the offending 1-based line number.
class FormatError : public InputError {
public:
    FormatError(const std::string& path, std::size_t line, const std::string& what)
        : InputError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Event or query times presented out of order.
class OrderingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Instance too large for an exhaustive routine, or an event-count cap hit.
class SizeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-convergence, loss of positive definiteness, ...).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Objective evaluated on the boundary of its domain (zero intensity at an event).
class BoundaryError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Iterative solver failed to converge; carries the iteration trace.
struct SolverTraceRow {
    int iter = 0;
    double loglik = 0.0;
    double grad_norm = 0.0;
};

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, std::vector<SolverTraceRow> trace)
        : NumericError(what), trace_(std::move(trace)) {}
    const std::vector<SolverTraceRow>& trace() const noexcept { return trace_; }

private:
    std::vector<SolverTraceRow> trace_;
};

}  // namespace opdyn
