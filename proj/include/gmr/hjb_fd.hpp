#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "gmr/models.hpp"
#include "gmr/sublinear.hpp"

namespace gmr {

/// Rectangular space-time grid for the explicit backward march (d <= 2).
/// dt_pde = 0 selects the largest stable step automatically.
struct GridSpec {
    struct Axis {
        double lo;
        double hi;
        int n_cells;  // nodes = n_cells + 1
    };
    std::vector<Axis> axes;
    double dt_pde = 0.0;
    double horizon_T = 0.0;

    void validate() const;
    int dim() const { return static_cast<int>(axes.size()); }
    long n_nodes() const;
    double spacing(int d) const { return (axes[d].hi - axes[d].lo) / axes[d].n_cells; }
    Eigen::VectorXd node_coords(long node) const;
};

/// Value function slices with gradient and Hessian fields on the grid.
struct ValueField {
    GridSpec grid;
    std::vector<double> times;                 // stored slice times, increasing
    std::vector<std::vector<double>> values;   // [time][node]
    std::vector<std::vector<double>> gradient; // [time][node*d + k]
    std::vector<std::vector<double>> hessian;  // [time][node*d*d + r*d + c]

    int time_index(double t) const;  // throws on missing slice
    double value_at(int time_index, const Eigen::VectorXd& x) const;  // multilinear
    Eigen::VectorXd gradient_at(int time_index, const Eigen::VectorXd& x) const;
    void write_csv(const std::string& path) const;  // t,node_coords...,value
};

/// Worst-case parameter field; every entry is an interval endpoint.
struct SigmaStarField {
    GridSpec grid;
    std::vector<double> times;
    std::vector<std::vector<double>> sigma_star;  // [time][node]

    void write_csv(const std::string& path) const;  // t,node_coords...,sigma_star
};

/// Fully nonlinear G-HJB problem in the form
///   dv/dt + G(bracket(x, grad v, hess v)) + <drift(x, s*), grad v> + extra = 0,
/// where the parameter-free bracket determines the worst-case endpoint s* and
/// diffusion(x, s*) is the full second-order coefficient a with term (1/2) a : hess v.
struct GHjbProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, double sigma_star)> drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& x, double sigma_star)> diffusion_aa;
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                         const Eigen::MatrixXd& hess)>
        bracket;
    bool endpoint_squared = false;  // parameter enters the bracket quadratically
    /// Optional gradient nonlinearity / running cost (e.g. -1/2 |B' grad|^2 + q0/2).
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& grad)> extra;
    std::function<double(const Eigen::VectorXd& x)> terminal;
    /// First-order term differencing: true = second-order upwind-biased
    /// stencils (exact for quadratic value functions), false = classical
    /// first-order upwind.
    bool second_order_upwind = true;
};

/// Explicit monotone backward march from v(T, .) = terminal. Slices are
/// stored at the requested times (t = 0 and t = T always included).
ValueField solve_ghjb(const GHjbProblem& problem, const UncertaintyInterval& theta,
                      const GridSpec& grid, std::vector<double> store_times = {});

/// Per-node worst-case endpoint: g_argmax of the supplied bracket evaluated on
/// the stored derivative fields.
SigmaStarField sigma_star_field(
    const ValueField& vf, const UncertaintyInterval& theta,
    const std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                               const Eigen::MatrixXd& hess)>& bracket);

/// Classical LQ verification oracle for a fixed diffusion parameter:
///   v(t, x) = 1/2 x' P(t) x + c(t),
///   dP/dt = -(A'P + PA - P B B' P + Q0),  P(T) = Q1,
///   dc/dt = -(sigma/2) tr(B B' P),        c(T) = 0.
/// Note the terminal convention: Q1 is the weight of 1/2 x'Q1 x, so a terminal
/// cost g(x) = x1^2 corresponds to Q1 = diag(2, 0).
struct LQProblemSpec {
    Eigen::MatrixXd A, B, Q0, Q1;
    double horizon_T;
};

struct RiccatiSolution {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> P;
    std::vector<double> c;
};

/// RK4 integration of the Riccati pair, fixed step <= 1e-4.
RiccatiSolution solve_riccati(const LQProblemSpec& model, double sigma_fixed,
                              double t_from = 0.0, double step = 1e-4);

double riccati_value(const LQProblemSpec& model, double sigma_fixed, double t,
                     const Eigen::VectorXd& x);

/// G-HJB problem of the (possibly epsilon-scaled) LQ regulator:
///   dv/dt + G(BB' : hess v) + <grad v, A x> - 1/2 <B, grad v>^2 + 1/2 x'Q0 x = 0
/// with terminal 1/2 x'Q1 x (same weight convention as LQProblemSpec).
GHjbProblem make_lq_ghjb(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q0, const Eigen::MatrixXd& Q1);

/// G-HJB problem of the homogenised 2-D triad QoI E_r[R1(T)]: the parameter
/// enters the bracket quadratically through both the diffusion and the f1
/// drift part; the remaining drift f2 is parameter-free.
GHjbProblem make_triad_limit_ghjb(const TriadModel& model);

}  // namespace gmr
