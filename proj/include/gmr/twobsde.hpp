#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "gmr/models.hpp"
#include "gmr/sublinear.hpp"

namespace gmr {

/// Second-order BSDE representation of a fully nonlinear parabolic PDE.
/// Convention: the driver equals the time derivative of the value function,
///   f(t, x, y, z, S) = dv/dt = -(G-term) - <drift, z> - running terms,
/// so the backward rollback reads
///   Y_n = Y_{n+1} - f dt - z . dX_n - 1/2 Tr[S sigma sigma'(X_n)] dt.
struct TwoBsdeProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward_drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> forward_diffusion;  // d x m
    int dim = 0;
    int brownian_dim = 0;
    Eigen::VectorXd x0;
    double horizon_T = 0.0;
    UncertaintyInterval theta{1.0, 1.0};
    /// Fine Euler substeps per backward (regression) step; the solver raises
    /// this further if needed so the forward step never exceeds max_fine_dt.
    int fine_substeps = 1;
    double max_fine_dt = 0.0;  // 0 = no constraint
    std::function<double(double t, const Eigen::VectorXd& x, double y, const Eigen::VectorXd& z,
                         const Eigen::MatrixXd& S)>
        driver;
    std::function<double(const Eigen::VectorXd&)> terminal;

    void validate() const;
};

/// Per-step regression surrogate family: polynomial of total degree `degree`
/// in the standardized state, fitted by ridge-regularised least squares.
struct ApproximatorSpec {
    int degree = 2;
    double ridge = 1e-8;

    void validate() const;
    int n_features(int dim) const;
};

struct TwoBsdeSolution {
    double y0 = 0.0;
    Eigen::VectorXd z0;
    Eigen::MatrixXd gamma0;
    /// Fitted surrogate coefficients per backward step (step index 1..N-1,
    /// stored in time order; entry n corresponds to the fit at t_n).
    std::vector<Eigen::VectorXd> step_coefficients;
    /// RMS residual of re-propagating y0 forward through the fitted
    /// surrogates against the terminal data; shrinks under refinement.
    double terminal_mismatch = 0.0;
    long n_samples = 0;
    long n_steps = 0;
    unsigned long long seed = 0;

    /// Single-line report: y0,z0_components...,terminal_mismatch,n_steps,n_samples,seed
    void write_report(const std::string& path) const;
};

TwoBsdeSolution solve_2bsde(const TwoBsdeProblem& problem, const ApproximatorSpec& approx,
                            long n_steps, long n_samples, unsigned long long seed);

/// Driver of the LQ G-HJB equation
///   dv/dt + G(BB' : S) + <Ax, z> - 1/2 <B, z>^2 + 1/2 x'Q0 x = 0
/// in the rollback convention above (f = dv/dt).
using Driver = std::function<double(double, const Eigen::VectorXd&, double,
                                    const Eigen::VectorXd&, const Eigen::MatrixXd&)>;

Driver make_lq_driver(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q0, const UncertaintyInterval& theta);
Driver make_lq_driver(const MultiscaleLQModel& model);
Driver make_lq_driver(const ReducedLQModel& model);

/// Quantity-of-interest problem E_x[R1(T)] for the triad system: `full` is the
/// 3-D epsilon-scaled system, `limit` the homogenised 2-D slow system.
enum class TriadVariant { full, limit };

TwoBsdeProblem make_triad_qoi_problem(const TriadModel& model, TriadVariant which, double T,
                                      const Eigen::VectorXd& x0);

}  // namespace gmr
