#pragma once

#include <Eigen/Dense>
#include <array>

#include "gmr/sublinear.hpp"

namespace gmr {

/// Block-partitioned coefficients of a linear slow-fast system. The fast-fast
/// block A22 must be Hurwitz; this is checked at construction.
struct BlockMatrices {
    Eigen::MatrixXd A11, A12, A21, A22;  // drift blocks
    Eigen::MatrixXd B1, B2;              // control blocks
    Eigen::MatrixXd C1, C2;              // noise blocks

    BlockMatrices(Eigen::MatrixXd A11, Eigen::MatrixXd A12, Eigen::MatrixXd A21,
                  Eigen::MatrixXd A22, Eigen::MatrixXd B1, Eigen::MatrixXd B2,
                  Eigen::MatrixXd C1, Eigen::MatrixXd C2);

    int n_slow() const { return static_cast<int>(A11.rows()); }
    int n_fast() const { return static_cast<int>(A22.rows()); }
    int n_control() const { return static_cast<int>(B1.cols()); }
    int n_noise() const { return static_cast<int>(C1.cols()); }
};

/// Linear-quadratic slow-fast control model with interval-uncertain diffusion.
/// fast_scaling_exponent p scales the mixed blocks by eps^{-p/2} and the
/// fast-fast block by eps^{-p} (p = 2 reproduces the eps^{-1}/eps^{-2} scaling
/// of the worked regulator example).
struct MultiscaleLQModel {
    BlockMatrices blocks;
    double epsilon;
    int fast_scaling_exponent;  // 1 or 2
    Eigen::MatrixXd Q0, Q1;     // running / terminal weights on the slow block
    double horizon_T;
    UncertaintyInterval sigma;

    MultiscaleLQModel(BlockMatrices blocks, double epsilon, int fast_scaling_exponent,
                      Eigen::MatrixXd Q0, Eigen::MatrixXd Q1, double horizon_T,
                      UncertaintyInterval sigma);

    /// Assembled epsilon-scaled matrices of the full system.
    Eigen::MatrixXd full_A() const;
    Eigen::MatrixXd full_B() const;
    Eigen::MatrixXd full_C() const;
};

/// Averaged limit of a MultiscaleLQModel.
struct ReducedLQModel {
    Eigen::MatrixXd A_bar, B_bar, C_bar;
    Eigen::MatrixXd Q0, Q1;
    double horizon_T;
    UncertaintyInterval sigma;

    /// D_bar = (I, -A12 A22^{-1}): maps the full system's Brownian driver onto
    /// the reduced equation, used for common-random-number coupling.
    Eigen::MatrixXd D_bar;
};

/// A_bar = A11 - A12 A22^{-1} A21 and companions. Throws SolverError if A22 is
/// numerically singular (condition number above 1e12).
ReducedLQModel reduce_lq(const MultiscaleLQModel& model);

/// Three-mode bilinear (triad) system with uncertain noise level lambda.
struct TriadModel {
    double A1, A2, A3;  // must satisfy A1 + A2 + A3 = 0
    UncertaintyInterval lambda;
    double epsilon;
    double gamma;

    TriadModel(double A1, double A2, double A3, UncertaintyInterval lambda,
               double epsilon, double gamma = 1.0);
};

/// Homogenised limit of the triad system at a fixed noise level.
struct TriadLimit {
    double A1, A2, A3;
    double lambda_value;
    double gamma;

    TriadLimit(double A1, double A2, double A3, double lambda_value, double gamma = 1.0);
};

/// f(r) = (A1 r1 (A3 r2^2 + lambda^2/2 A2), A2 r2 (A3 r1^2 + lambda^2/2 A1)).
Eigen::Vector2d triad_limit_drift(const TriadLimit& limit, const Eigen::Vector2d& r);

/// sigma(r) = (lambda/gamma) (A1 r2, A2 r1), multiplying one scalar Brownian.
Eigen::Vector2d triad_limit_diffusion(const TriadLimit& limit, const Eigen::Vector2d& r);

/// lambda-free part of the limit drift: f2 = f - f1/2 with f1 = lambda^2 A1 A2 r.
/// Works out to f2(r) = A3 r1 r2 (A1 r2, A2 r1).
Eigen::Vector2d triad_limit_drift_lambda_free(const TriadLimit& limit, const Eigen::Vector2d& r);

/// Full-system drift (1/eps^2) L(x) + (1/eps) B(x,x) with L = -(0,0,u) and
/// B = (A1 r2 u, A2 r1 u, A3 r1 r2). Diffusion is (0,0,lambda/eps).
Eigen::Vector3d triad_full_drift(const TriadModel& model, const Eigen::Vector3d& x);

/// Pathwise invariant I(r) = A1 r2^2 - A2 r1^2 of the triad dynamics.
double conserved_quantity(double A1, double A2, const Eigen::Vector2d& r);

/// The four equilibria (+-lambda sqrt(A1/(2|A3|)), +-lambda sqrt(A2/(2|A3|))).
/// Requires A1 > 0, A2 > 0, A3 < 0.
std::array<Eigen::Vector2d, 4> triad_equilibria(double A1, double A2, double A3,
                                                double lambda_value);

/// Slow-fast toy example whose averaged vector field undergoes a supercritical
/// pitchfork bifurcation at theta = 1/3.
struct PitchforkModel {
    double theta;  // in [0, 1]
    double epsilon;

    PitchforkModel(double theta, double epsilon);
};

/// F(r, theta) = -r^3 + r (1 - 3 theta).
double pitchfork_limit_vector_field(double theta, double r);

}  // namespace gmr
