#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gmr/sublinear.hpp"

namespace gmr {

using DriftFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
/// State -> (dim x m) matrix multiplying an m-dimensional Brownian increment.
using DiffusionFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct SimConfig {
    double dt;
    double horizon_T;
    int n_paths;
    std::uint64_t master_seed;
    Eigen::VectorXd initial_state;
    bool store_increments = true;

    /// Steps per path; requires round(T/dt)*dt to match T to relative 1e-9.
    long n_steps() const;
    void validate() const;
};

/// Euler-Maruyama ensemble. States are stored flat, path-major.
struct PathEnsemble {
    std::vector<double> times;  // n_steps + 1 entries
    int n_paths = 0;
    int dim = 0;
    int brownian_dim = 0;
    std::uint64_t master_seed = 0;
    std::vector<double> states;      // [path][step][component]
    std::vector<double> increments;  // [path][step][driver], empty unless retained

    double state(int path, long step, int comp) const {
        return states[(static_cast<long>(path) * n_steps_p1() + step) * dim + comp];
    }
    double increment(int path, long step, int driver) const {
        return increments[(static_cast<long>(path) * (n_steps_p1() - 1) + step) * brownian_dim +
                          driver];
    }
    long n_steps_p1() const { return static_cast<long>(times.size()); }

    /// CSV with header `path,step,t,x0,...,x{d-1}`.
    void write_csv(const std::string& path) const;
};

/// Forward Euler-Maruyama. Per-path noise comes from the counter RNG keyed by
/// (master_seed, path, step), so the ensemble is independent of evaluation
/// order. Throws SimulationError if a state norm exceeds 1e8 or turns non-finite.
PathEnsemble simulate(const DriftFn& drift, const DiffusionFn& diffusion,
                      const SimConfig& config, int brownian_dim);

/// One side of a coupled slow-fast pair. slow_dim leading components are the
/// resolved variables compared across systems.
struct SystemSpec {
    DriftFn drift;
    DiffusionFn diffusion;
    int dim;
    int brownian_dim;
    Eigen::VectorXd x0;
    int slow_dim;
};

/// Simulates both systems on the same grid with identical Brownian increments
/// per (path, step). Both must consume the same driver dimension.
std::pair<PathEnsemble, PathEnsemble> simulate_coupled(const SystemSpec& full,
                                                       const SystemSpec& reduced,
                                                       const SimConfig& config);

/// Per-path sup_t |slow(full) - slow(reduced)|^2 without storing trajectories;
/// noise stream identical to simulate_coupled.
std::vector<double> coupled_sup_error_sq(const SystemSpec& full, const SystemSpec& reduced,
                                         const SimConfig& config);

struct StrongErrorReport {
    std::vector<double> epsilons;
    std::vector<double> errors;  // sqrt of the worst-case E sup |R_eps - R_bar|^2
    double fitted_slope;         // log-log slope; NaN if degenerate
    double intercept;

    void write_csv(const std::string& path) const;  // epsilon,error,slope_overall
};

/// Coupled pair for one (epsilon, theta); dt may depend on the stiffness of
/// the full system at this epsilon.
struct CoupledFamily {
    std::function<std::pair<SystemSpec, SystemSpec>(double eps, double theta)> make;
    std::function<double(double eps)> dt_for_eps;
};

/// Worst-case strong error over the theta grid per epsilon, plus the fitted
/// log-log convergence slope. eps_list must have >= 3 values spanning a
/// factor >= 4.
StrongErrorReport strong_error_rate(const CoupledFamily& family,
                                    const std::vector<double>& eps_list,
                                    const SimConfig& base_config, const ThetaGrid& theta_grid);

}  // namespace gmr
