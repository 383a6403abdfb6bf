#pragma once

#include <stdexcept>
#include <string>

namespace gmr {

/// Invalid or inconsistent user-supplied configuration (grids, intervals,
/// dimensions, config files). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure inside a solver (NaN, rank deficiency, blow-up).
/// CLI maps this to exit code 3.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Forward simulation failure; carries the offending step index.
class SimulationError : public SolverError {
public:
    SimulationError(const std::string& msg, long step)
        : SolverError(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
    long step_index;
};

}  // namespace gmr
