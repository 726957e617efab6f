#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tissue {

/// Invalid geometric input (resolution, margin, tiling, budget).
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Nonlinearity violating the structural assumptions (monotonicity, f(0)=0).
class NonlinearityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure of a solver; carries the residual history that led to it.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> history = {})
        : std::runtime_error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace tissue
