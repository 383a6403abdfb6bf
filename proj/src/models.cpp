#include "gmr/models.hpp"

#include <cmath>

#include "gmr/errors.hpp"

namespace gmr {

namespace {

void check_hurwitz(const Eigen::MatrixXd& A22) {
    const Eigen::EigenSolver<Eigen::MatrixXd> es(A22);
    const double max_real = es.eigenvalues().real().maxCoeff();
    if (!(max_real < -1e-10)) {
        throw ConfigError("A22 is not Hurwitz (max eigenvalue real part " +
                          std::to_string(max_real) + ")");
    }
}

void check_psd(const Eigen::MatrixXd& Q, const char* name) {
    if (Q.rows() != Q.cols() || !Q.isApprox(Q.transpose(), 1e-12)) {
        throw ConfigError(std::string(name) + " must be symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-12) {
        throw ConfigError(std::string(name) + " must be positive semi-definite");
    }
}

}  // namespace

BlockMatrices::BlockMatrices(Eigen::MatrixXd a11, Eigen::MatrixXd a12, Eigen::MatrixXd a21,
                             Eigen::MatrixXd a22, Eigen::MatrixXd b1, Eigen::MatrixXd b2,
                             Eigen::MatrixXd c1, Eigen::MatrixXd c2)
    : A11(std::move(a11)), A12(std::move(a12)), A21(std::move(a21)), A22(std::move(a22)),
      B1(std::move(b1)), B2(std::move(b2)), C1(std::move(c1)), C2(std::move(c2)) {
    const auto ns = A11.rows();
    const auto nf = A22.rows();
    if (A11.cols() != ns || A22.cols() != nf || A12.rows() != ns || A12.cols() != nf ||
        A21.rows() != nf || A21.cols() != ns) {
        throw ConfigError("inconsistent drift block dimensions");
    }
    if (B1.rows() != ns || B2.rows() != nf || B1.cols() != B2.cols()) {
        throw ConfigError("inconsistent control block dimensions");
    }
    if (C1.rows() != ns || C2.rows() != nf || C1.cols() != C2.cols()) {
        throw ConfigError("inconsistent noise block dimensions");
    }
    check_hurwitz(A22);
}

MultiscaleLQModel::MultiscaleLQModel(BlockMatrices blocks_, double eps, int p,
                                     Eigen::MatrixXd q0, Eigen::MatrixXd q1, double T,
                                     UncertaintyInterval sig)
    : blocks(std::move(blocks_)), epsilon(eps), fast_scaling_exponent(p),
      Q0(std::move(q0)), Q1(std::move(q1)), horizon_T(T), sigma(sig) {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(horizon_T > 0.0)) throw ConfigError("horizon_T must be positive");
    if (p != 1 && p != 2) throw ConfigError("fast_scaling_exponent must be 1 or 2");
    if (Q0.rows() != blocks.n_slow() || Q1.rows() != blocks.n_slow()) {
        throw ConfigError("Q0/Q1 must act on the slow block");
    }
    check_psd(Q0, "Q0");
    check_psd(Q1, "Q1");
}

Eigen::MatrixXd MultiscaleLQModel::full_A() const {
    const double mixed = std::pow(epsilon, -0.5 * fast_scaling_exponent);
    const double fast = std::pow(epsilon, -1.0 * fast_scaling_exponent);
    const int ns = blocks.n_slow(), nf = blocks.n_fast();
    Eigen::MatrixXd A(ns + nf, ns + nf);
    A.topLeftCorner(ns, ns) = blocks.A11;
    A.topRightCorner(ns, nf) = mixed * blocks.A12;
    A.bottomLeftCorner(nf, ns) = mixed * blocks.A21;
    A.bottomRightCorner(nf, nf) = fast * blocks.A22;
    return A;
}

Eigen::MatrixXd MultiscaleLQModel::full_B() const {
    const double mixed = std::pow(epsilon, -0.5 * fast_scaling_exponent);
    Eigen::MatrixXd B(blocks.n_slow() + blocks.n_fast(), blocks.n_control());
    B.topRows(blocks.n_slow()) = blocks.B1;
    B.bottomRows(blocks.n_fast()) = mixed * blocks.B2;
    return B;
}

Eigen::MatrixXd MultiscaleLQModel::full_C() const {
    const double mixed = std::pow(epsilon, -0.5 * fast_scaling_exponent);
    Eigen::MatrixXd C(blocks.n_slow() + blocks.n_fast(), blocks.n_noise());
    C.topRows(blocks.n_slow()) = blocks.C1;
    C.bottomRows(blocks.n_fast()) = mixed * blocks.C2;
    return C;
}

ReducedLQModel reduce_lq(const MultiscaleLQModel& model) {
    const auto& b = model.blocks;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.A22, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
    if (!std::isfinite(cond) || cond > 1e12) {
        throw SolverError("reduce_lq: A22 numerically singular (cond " + std::to_string(cond) + ")");
    }
    // A12 A22^{-1}, shared by all three corrections
    const Eigen::MatrixXd A12_A22inv =
        b.A22.transpose().partialPivLu().solve(b.A12.transpose()).transpose();
    ReducedLQModel r{b.A11 - A12_A22inv * b.A21,
                     b.B1 - A12_A22inv * b.B2,
                     b.C1 - A12_A22inv * b.C2,
                     model.Q0, model.Q1, model.horizon_T, model.sigma,
                     Eigen::MatrixXd()};
    r.D_bar.resize(b.n_slow(), b.n_slow() + b.n_fast());
    r.D_bar.leftCols(b.n_slow()) = Eigen::MatrixXd::Identity(b.n_slow(), b.n_slow());
    r.D_bar.rightCols(b.n_fast()) = -A12_A22inv;
    return r;
}

TriadModel::TriadModel(double a1, double a2, double a3, UncertaintyInterval lam,
                       double eps, double gam)
    : A1(a1), A2(a2), A3(a3), lambda(lam), epsilon(eps), gamma(gam) {
    if (std::abs(A1 + A2 + A3) > 1e-12) {
        throw ConfigError("triad coefficients must satisfy A1 + A2 + A3 = 0");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
}

TriadLimit::TriadLimit(double a1, double a2, double a3, double lam, double gam)
    : A1(a1), A2(a2), A3(a3), lambda_value(lam), gamma(gam) {
    if (std::abs(A1 + A2 + A3) > 1e-12) {
        throw ConfigError("triad coefficients must satisfy A1 + A2 + A3 = 0");
    }
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
}

Eigen::Vector2d triad_limit_drift(const TriadLimit& m, const Eigen::Vector2d& r) {
    const double l2 = m.lambda_value * m.lambda_value;
    return {m.A1 * r(0) * (m.A3 * r(1) * r(1) + 0.5 * l2 * m.A2),
            m.A2 * r(1) * (m.A3 * r(0) * r(0) + 0.5 * l2 * m.A1)};
}

Eigen::Vector2d triad_limit_diffusion(const TriadLimit& m, const Eigen::Vector2d& r) {
    const double s = m.lambda_value / m.gamma;
    return {s * m.A1 * r(1), s * m.A2 * r(0)};
}

Eigen::Vector2d triad_limit_drift_lambda_free(const TriadLimit& m, const Eigen::Vector2d& r) {
    const double c = m.A3 * r(0) * r(1);
    return {m.A1 * c * r(1), m.A2 * c * r(0)};
}

Eigen::Vector3d triad_full_drift(const TriadModel& m, const Eigen::Vector3d& x) {
    const double inv_eps = 1.0 / m.epsilon;
    const double inv_eps2 = inv_eps * inv_eps;
    const double r1 = x(0), r2 = x(1), u = x(2);
    return {inv_eps * m.A1 * r2 * u,
            inv_eps * m.A2 * r1 * u,
            -inv_eps2 * u + inv_eps * m.A3 * r1 * r2};
}

double conserved_quantity(double A1, double A2, const Eigen::Vector2d& r) {
    return A1 * r(1) * r(1) - A2 * r(0) * r(0);
}

std::array<Eigen::Vector2d, 4> triad_equilibria(double A1, double A2, double A3,
                                                double lambda_value) {
    if (!(A1 > 0.0) || !(A2 > 0.0) || !(A3 < 0.0)) {
        throw ConfigError("triad_equilibria requires A1 > 0, A2 > 0, A3 < 0");
    }
    const double r1 = lambda_value * std::sqrt(A1 / (2.0 * std::abs(A3)));
    const double r2 = lambda_value * std::sqrt(A2 / (2.0 * std::abs(A3)));
    return {Eigen::Vector2d(r1, r2), Eigen::Vector2d(r1, -r2),
            Eigen::Vector2d(-r1, r2), Eigen::Vector2d(-r1, -r2)};
}

PitchforkModel::PitchforkModel(double th, double eps) : theta(th), epsilon(eps) {
    if (th < 0.0 || th > 1.0) throw ConfigError("pitchfork theta must lie in [0, 1]");
    if (!(eps > 0.0)) throw ConfigError("epsilon must be positive");
}

double pitchfork_limit_vector_field(double theta, double r) {
    return -r * r * r + r * (1.0 - 3.0 * theta);
}

}  // namespace gmr
