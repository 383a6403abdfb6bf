#include "gmr/hjb_fd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "gmr/errors.hpp"
#include "gmr/parallel.hpp"

namespace gmr {

void GridSpec::validate() const {
    if (axes.empty() || axes.size() > 2)
        throw ConfigError("grid dimension must be 1 or 2");
    for (const auto& ax : axes) {
        if (!(ax.lo < ax.hi)) throw ConfigError("grid axis requires lo < hi");
        if (ax.n_cells < 8) throw ConfigError("grid axis requires at least 8 cells");
    }
    if (dt_pde < 0.0) throw ConfigError("dt_pde must be >= 0");
    if (!(horizon_T > 0.0)) throw ConfigError("horizon_T must be positive");
}

long GridSpec::n_nodes() const {
    long n = 1;
    for (const auto& ax : axes) n *= ax.n_cells + 1;
    return n;
}

Eigen::VectorXd GridSpec::node_coords(long node) const {
    const int d = dim();
    Eigen::VectorXd x(d);
    if (d == 1) {
        x[0] = axes[0].lo + node * spacing(0);
    } else {
        const long n1 = axes[1].n_cells + 1;
        x[0] = axes[0].lo + (node / n1) * spacing(0);
        x[1] = axes[1].lo + (node % n1) * spacing(1);
    }
    return x;
}

int ValueField::time_index(double t) const {
    for (size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t)) + 1e-12)
            return static_cast<int>(k);
    throw ConfigError("no stored slice at requested time");
}

namespace {

// Clamped cell location for multilinear interpolation.
void locate(const GridSpec::Axis& ax, double h, double x, int& i, double& w) {
    double s = (x - ax.lo) / h;
    i = static_cast<int>(std::floor(s));
    i = std::max(0, std::min(ax.n_cells - 1, i));
    w = s - i;
    w = std::max(0.0, std::min(1.0, w));
}

}  // namespace

double ValueField::value_at(int k, const Eigen::VectorXd& x) const {
    const auto& v = values.at(k);
    const int d = grid.dim();
    if (x.size() != d) throw ConfigError("query point dimension mismatch");
    int i;
    double w;
    locate(grid.axes[0], grid.spacing(0), x[0], i, w);
    if (d == 1) return (1 - w) * v[i] + w * v[i + 1];
    const long n1 = grid.axes[1].n_cells + 1;
    int j;
    double u;
    locate(grid.axes[1], grid.spacing(1), x[1], j, u);
    return (1 - w) * ((1 - u) * v[i * n1 + j] + u * v[i * n1 + j + 1]) +
           w * ((1 - u) * v[(i + 1) * n1 + j] + u * v[(i + 1) * n1 + j + 1]);
}

Eigen::VectorXd ValueField::gradient_at(int k, const Eigen::VectorXd& x) const {
    const auto& g = gradient.at(k);
    const int d = grid.dim();
    if (x.size() != d) throw ConfigError("query point dimension mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    int i;
    double w;
    locate(grid.axes[0], grid.spacing(0), x[0], i, w);
    if (d == 1) {
        for (int c = 0; c < d; ++c) out[c] = (1 - w) * g[i * d + c] + w * g[(i + 1) * d + c];
        return out;
    }
    const long n1 = grid.axes[1].n_cells + 1;
    int j;
    double u;
    locate(grid.axes[1], grid.spacing(1), x[1], j, u);
    for (int c = 0; c < d; ++c) {
        out[c] = (1 - w) * ((1 - u) * g[(i * n1 + j) * d + c] + u * g[(i * n1 + j + 1) * d + c]) +
                 w * ((1 - u) * g[((i + 1) * n1 + j) * d + c] +
                      u * g[((i + 1) * n1 + j + 1) * d + c]);
    }
    return out;
}

namespace {

void write_field_csv(const std::string& path, const GridSpec& grid,
                     const std::vector<double>& times,
                     const std::vector<std::vector<double>>& field, const char* value_name) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw SolverError("cannot open output file: " + path);
    std::fprintf(f, "t");
    for (int d = 0; d < grid.dim(); ++d) std::fprintf(f, ",x%d", d);
    std::fprintf(f, ",%s\n", value_name);
    for (size_t k = 0; k < times.size(); ++k) {
        for (long node = 0; node < grid.n_nodes(); ++node) {
            Eigen::VectorXd x = grid.node_coords(node);
            std::fprintf(f, "%.17g", times[k]);
            for (int d = 0; d < grid.dim(); ++d) std::fprintf(f, ",%.17g", x[d]);
            std::fprintf(f, ",%.17g\n", field[k][node]);
        }
    }
    std::fclose(f);
}

}  // namespace

void ValueField::write_csv(const std::string& path) const {
    write_field_csv(path, grid, times, values, "value");
}

void SigmaStarField::write_csv(const std::string& path) const {
    write_field_csv(path, grid, times, sigma_star, "sigma_star");
}

namespace {

// Finite-difference stencils on a flattened (<= 2-d) slice. All second-order
// variants are exact on quadratic polynomials, including at the boundary.
struct Stencil {
    const double* v;
    int n[2];      // nodes per axis
    double h[2];   // spacings
    int dim;
    long stride0;  // n[1] for d=2, 1 for d=1

    long flat(int i, int j) const { return i * stride0 + j; }

    double d1(int i, int j, int d) const {
        const int id = (d == 0) ? i : j;
        const long s = (d == 0) ? stride0 : 1;
        const long c = flat(i, j);
        if (id > 0 && id < n[d] - 1) return (v[c + s] - v[c - s]) / (2 * h[d]);
        if (id == 0) return (-3 * v[c] + 4 * v[c + s] - v[c + 2 * s]) / (2 * h[d]);
        return (3 * v[c] - 4 * v[c - s] + v[c - 2 * s]) / (2 * h[d]);
    }

    double d2(int i, int j, int d) const {
        const int id = (d == 0) ? i : j;
        const long s = (d == 0) ? stride0 : 1;
        const long c = flat(i, j);
        if (id > 0 && id < n[d] - 1) return (v[c + s] - 2 * v[c] + v[c - s]) / (h[d] * h[d]);
        if (id == 0) return (v[c] - 2 * v[c + s] + v[c + 2 * s]) / (h[d] * h[d]);
        return (v[c] - 2 * v[c - s] + v[c - 2 * s]) / (h[d] * h[d]);
    }

    double dcross(int i, int j) const {  // d^2 v / dx0 dx1
        if (i > 0 && i < n[0] - 1) return (d1(i + 1, j, 1) - d1(i - 1, j, 1)) / (2 * h[0]);
        if (i == 0) return (d1(1, j, 1) - d1(0, j, 1)) / h[0];
        return (d1(i, j, 1) - d1(i - 1, j, 1)) / h[0];
    }

    // Directional first derivative biased toward the flow of information.
    // second_order = true selects three-point one-sided stencils.
    double upwind(int i, int j, int d, double b, bool second_order) const {
        const int id = (d == 0) ? i : j;
        const long s = (d == 0) ? stride0 : 1;
        const long c = flat(i, j);
        const double hd = h[d];
        const long sgn = (b >= 0.0) ? s : -s;
        const int room = (b >= 0.0) ? (n[d] - 1 - id) : id;
        if (second_order) {
            if (room >= 2)
                return ((b >= 0.0) ? 1.0 : -1.0) *
                       (-3 * v[c] + 4 * v[c + sgn] - v[c + 2 * sgn]) / (2 * hd);
            if (room == 1) return (v[c + s] - v[c - s]) / (2 * hd);  // interior: central
            return ((b >= 0.0) ? 1.0 : -1.0) * (3 * v[c] - 4 * v[c - sgn] + v[c - 2 * sgn]) /
                   (2 * hd);
        }
        if (room >= 1) return ((b >= 0.0) ? 1.0 : -1.0) * (v[c + sgn] - v[c]) / hd;
        return ((b >= 0.0) ? 1.0 : -1.0) * (v[c] - v[c - sgn]) / hd;
    }
};

}  // namespace

ValueField solve_ghjb(const GHjbProblem& problem, const UncertaintyInterval& theta,
                      const GridSpec& grid, std::vector<double> store_times) {
    grid.validate();
    if (!problem.drift || !problem.diffusion_aa || !problem.bracket || !problem.terminal)
        throw ConfigError("G-HJB problem is missing a required coefficient");

    const int d = grid.dim();
    const long n_nodes = grid.n_nodes();
    int n[2] = {grid.axes[0].n_cells + 1, d == 2 ? grid.axes[1].n_cells + 1 : 1};
    double h[2] = {grid.spacing(0), d == 2 ? grid.spacing(1) : 1.0};

    // Coefficients are time-homogeneous and the worst-case parameter is always
    // an interval endpoint, so drift and diffusion can be tabulated up front.
    std::vector<Eigen::VectorXd> xs(n_nodes);
    std::vector<double> drift_tab[2];   // [endpoint][node*d + k]
    std::vector<double> diff_tab[2];    // [endpoint][node*d*d + r*d + c]
    const double endpoints[2] = {theta.sigma_lo, theta.sigma_hi};
    for (int e = 0; e < 2; ++e) {
        drift_tab[e].resize(n_nodes * d);
        diff_tab[e].resize(n_nodes * d * d);
    }
    for (long node = 0; node < n_nodes; ++node) {
        xs[node] = grid.node_coords(node);
        for (int e = 0; e < 2; ++e) {
            Eigen::VectorXd b = problem.drift(xs[node], endpoints[e]);
            Eigen::MatrixXd a = problem.diffusion_aa(xs[node], endpoints[e]);
            if (b.size() != d || a.rows() != d || a.cols() != d)
                throw ConfigError("coefficient dimension does not match the grid");
            for (int k = 0; k < d; ++k) drift_tab[e][node * d + k] = b[k];
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) diff_tab[e][node * d * d + r * d + c] = a(r, c);
        }
    }

    // Explicit-scheme stability bound over both interval endpoints.
    const double drift_factor = problem.second_order_upwind ? 1.5 : 1.0;
    double bound = 0.0;
    for (long node = 0; node < n_nodes; ++node) {
        for (int e = 0; e < 2; ++e) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                s += std::abs(diff_tab[e][node * d * d + k * d + k]) / (h[k] * h[k]);
                s += drift_factor * std::abs(drift_tab[e][node * d + k]) / h[k];
            }
            if (d == 2) s += std::abs(diff_tab[e][node * d * d + 1]) / (h[0] * h[1]);
            bound = std::max(bound, s);
        }
    }
    double dt_max = (bound > 0.0) ? 0.9 / bound : grid.horizon_T;
    double dt = grid.dt_pde;
    if (dt == 0.0) {
        dt = dt_max;
    } else if (dt > dt_max * (1 + 1e-12)) {
        throw ConfigError("dt_pde violates the explicit stability bound");
    }
    const long n_t = std::max<long>(1, static_cast<long>(std::ceil(grid.horizon_T / dt - 1e-12)));
    dt = grid.horizon_T / n_t;

    // Requested storage times snapped to the nearest step index.
    std::set<long> store_steps = {0, n_t};
    for (double t : store_times) {
        if (t < -1e-12 || t > grid.horizon_T * (1 + 1e-12))
            throw ConfigError("store time outside [0, T]");
        store_steps.insert(std::max<long>(0, std::min(n_t, std::lround(t / dt))));
    }

    ValueField out;
    out.grid = grid;

    std::vector<double> cur(n_nodes), next(n_nodes);
    for (long node = 0; node < n_nodes; ++node) cur[node] = problem.terminal(xs[node]);

    auto store_slice = [&](long step) {
        Stencil st{cur.data(), {n[0], n[1]}, {h[0], h[1]}, d, d == 2 ? n[1] : 1};
        std::vector<double> grad(n_nodes * d), hess(n_nodes * d * d);
        for (long node = 0; node < n_nodes; ++node) {
            const int i = d == 2 ? static_cast<int>(node / n[1]) : static_cast<int>(node);
            const int j = d == 2 ? static_cast<int>(node % n[1]) : 0;
            for (int k = 0; k < d; ++k) {
                grad[node * d + k] = st.d1(i, j, k);
                hess[node * d * d + k * d + k] = st.d2(i, j, k);
            }
            if (d == 2) {
                const double c = st.dcross(i, j);
                hess[node * d * d + 1] = c;
                hess[node * d * d + d] = c;
            }
        }
        out.times.insert(out.times.begin(), step * dt);
        out.values.insert(out.values.begin(), cur);
        out.gradient.insert(out.gradient.begin(), std::move(grad));
        out.hessian.insert(out.hessian.begin(), std::move(hess));
    };

    if (store_steps.count(n_t)) store_slice(n_t);

    for (long step = n_t - 1; step >= 0; --step) {
        Stencil st{cur.data(), {n[0], n[1]}, {h[0], h[1]}, d, d == 2 ? n[1] : 1};
        parallel_for(n_nodes, [&](long node) {
            const int i = d == 2 ? static_cast<int>(node / n[1]) : static_cast<int>(node);
            const int j = d == 2 ? static_cast<int>(node % n[1]) : 0;
            Eigen::VectorXd grad(d);
            Eigen::MatrixXd hss(d, d);
            for (int k = 0; k < d; ++k) {
                grad[k] = st.d1(i, j, k);
                hss(k, k) = st.d2(i, j, k);
            }
            if (d == 2) {
                const double c = st.dcross(i, j);
                hss(0, 1) = hss(1, 0) = c;
            }
            const double br = problem.bracket(xs[node], grad, hss);
            const double sstar = g_argmax(br, theta);
            const int e = (sstar == theta.sigma_hi) ? 1 : 0;

            double rhs = 0.0;
            const double* a = &diff_tab[e][node * d * d];
            const double* b = &drift_tab[e][node * d];
            for (int k = 0; k < d; ++k) {
                rhs += 0.5 * a[k * d + k] * hss(k, k);
                rhs += b[k] * st.upwind(i, j, k, b[k], problem.second_order_upwind);
            }
            if (d == 2) rhs += a[1] * hss(0, 1);
            if (problem.extra) rhs += problem.extra(xs[node], grad);
            next[node] = cur[node] + dt * rhs;
            if (!std::isfinite(next[node]))
                throw SolverError("G-HJB march produced a non-finite value at t = " +
                                  std::to_string(step * dt));
        });
        cur.swap(next);
        if (store_steps.count(step)) store_slice(step);
    }
    return out;
}

SigmaStarField sigma_star_field(
    const ValueField& vf, const UncertaintyInterval& theta,
    const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                               const Eigen::MatrixXd&)>& bracket) {
    if (!bracket) throw ConfigError("sigma_star_field requires a bracket");
    const int d = vf.grid.dim();
    const long n_nodes = vf.grid.n_nodes();
    SigmaStarField out;
    out.grid = vf.grid;
    out.times = vf.times;
    out.sigma_star.resize(vf.times.size());
    for (size_t k = 0; k < vf.times.size(); ++k) {
        out.sigma_star[k].resize(n_nodes);
        for (long node = 0; node < n_nodes; ++node) {
            Eigen::VectorXd x = vf.grid.node_coords(node);
            Eigen::Map<const Eigen::VectorXd> grad(&vf.gradient[k][node * d], d);
            Eigen::Map<const Eigen::MatrixXd> hess(&vf.hessian[k][node * d * d], d, d);
            out.sigma_star[k][node] = g_argmax(bracket(x, grad, hess), theta);
        }
    }
    return out;
}

namespace {

struct RiccatiRhs {
    const Eigen::MatrixXd &A, &BBt, &Q0;
    double sigma;

    // Derivatives in the reversed time s = T - t (integrating away from T).
    Eigen::MatrixXd dP(const Eigen::MatrixXd& P) const {
        return A.transpose() * P + P * A - P * BBt * P + Q0;
    }
    double dc(const Eigen::MatrixXd& P) const { return 0.5 * sigma * (BBt * P).trace(); }
};

}  // namespace

RiccatiSolution solve_riccati(const LQProblemSpec& model, double sigma_fixed, double t_from,
                              double step) {
    const int d = static_cast<int>(model.A.rows());
    if (model.A.cols() != d || model.B.rows() != d || model.Q0.rows() != d ||
        model.Q0.cols() != d || model.Q1.rows() != d || model.Q1.cols() != d)
        throw ConfigError("Riccati problem dimensions are inconsistent");
    if (!(model.horizon_T > 0.0) || t_from < 0.0 || t_from > model.horizon_T)
        throw ConfigError("Riccati integration window is invalid");
    if (!(step > 0.0) || step > 1e-4 + 1e-15) throw ConfigError("Riccati step must be <= 1e-4");
    if (sigma_fixed < 0.0) throw ConfigError("sigma must be nonnegative");

    const Eigen::MatrixXd BBt = model.B * model.B.transpose();
    RiccatiRhs rhs{model.A, BBt, model.Q0, sigma_fixed};

    const double span = model.horizon_T - t_from;
    const long n = std::max<long>(1, static_cast<long>(std::ceil(span / step - 1e-12)));
    const double hh = span / n;

    RiccatiSolution sol;
    sol.times.resize(n + 1);
    sol.P.resize(n + 1);
    sol.c.resize(n + 1);

    Eigen::MatrixXd P = model.Q1;
    double c = 0.0;
    sol.times[n] = model.horizon_T;
    sol.P[n] = P;
    sol.c[n] = c;
    for (long k = n; k-- > 0;) {
        const Eigen::MatrixXd k1 = rhs.dP(P);
        const double c1 = rhs.dc(P);
        const Eigen::MatrixXd k2 = rhs.dP(P + 0.5 * hh * k1);
        const double c2 = rhs.dc(P + 0.5 * hh * k1);
        const Eigen::MatrixXd k3 = rhs.dP(P + 0.5 * hh * k2);
        const double c3 = rhs.dc(P + 0.5 * hh * k2);
        const Eigen::MatrixXd k4 = rhs.dP(P + hh * k3);
        const double c4 = rhs.dc(P + hh * k3);
        P += (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        c += (hh / 6.0) * (c1 + 2 * c2 + 2 * c3 + c4);
        if (P.norm() > 1e8) throw SolverError("Riccati solution blow-up");
        sol.times[k] = model.horizon_T - (n - k) * hh;
        sol.P[k] = P;
        sol.c[k] = c;
    }
    return sol;
}

double riccati_value(const LQProblemSpec& model, double sigma_fixed, double t,
                     const Eigen::VectorXd& x) {
    if (x.size() != model.A.rows()) throw ConfigError("state dimension mismatch");
    RiccatiSolution sol = solve_riccati(model, sigma_fixed, t);
    return 0.5 * x.dot(sol.P.front() * x) + sol.c.front();
}

GHjbProblem make_lq_ghjb(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q0, const Eigen::MatrixXd& Q1) {
    GHjbProblem p;
    const Eigen::MatrixXd BBt = B * B.transpose();
    p.drift = [A](const Eigen::VectorXd& x, double) -> Eigen::VectorXd { return A * x; };
    p.diffusion_aa = [BBt](const Eigen::VectorXd&, double s) -> Eigen::MatrixXd {
        return s * BBt;
    };
    p.bracket = [BBt](const Eigen::VectorXd&, const Eigen::VectorXd&,
                      const Eigen::MatrixXd& hess) { return (BBt.array() * hess.array()).sum(); };
    p.endpoint_squared = false;
    p.extra = [B, Q0](const Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
        const Eigen::VectorXd Bg = B.transpose() * grad;
        return -0.5 * Bg.squaredNorm() + 0.5 * x.dot(Q0 * x);
    };
    p.terminal = [Q1](const Eigen::VectorXd& x) { return 0.5 * x.dot(Q1 * x); };
    return p;
}

GHjbProblem make_triad_limit_ghjb(const TriadModel& model) {
    GHjbProblem p;
    const double A1 = model.A1, A2 = model.A2;
    const double g2 = model.gamma * model.gamma;
    const TriadLimit lim_unit(model.A1, model.A2, model.A3, 1.0, model.gamma);
    p.drift = [lim_unit, A1, A2, g2](const Eigen::VectorXd& x, double s) -> Eigen::VectorXd {
        const Eigen::Vector2d r(x[0], x[1]);
        // f2 plus the worst-case half of f1 = (s^2/g^2) A1 A2 r
        return triad_limit_drift_lambda_free(lim_unit, r) + (0.5 * s * s * A1 * A2 / g2) * r;
    };
    p.diffusion_aa = [A1, A2, g2](const Eigen::VectorXd& x, double s) -> Eigen::MatrixXd {
        const Eigen::Vector2d w(A1 * x[1], A2 * x[0]);
        return (s * s / g2) * w * w.transpose();
    };
    p.bracket = [A1, A2, g2](const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                             const Eigen::MatrixXd& hess) {
        const Eigen::Vector2d r(x[0], x[1]);
        const Eigen::Vector2d w(A1 * r[1], A2 * r[0]);
        return (w.dot(hess * w) + A1 * A2 * grad.dot(r)) / g2;
    };
    p.endpoint_squared = true;
    p.terminal = [](const Eigen::VectorXd& x) { return x[0]; };
    return p;
}

}  // namespace gmr
