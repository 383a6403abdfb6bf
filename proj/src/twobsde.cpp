#include "gmr/twobsde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gmr/errors.hpp"
#include "gmr/parallel.hpp"
#include "gmr/rng.hpp"

namespace gmr {

void TwoBsdeProblem::validate() const {
    if (!forward_drift || !forward_diffusion || !driver || !terminal)
        throw ConfigError("2BSDE problem is missing a required map");
    if (dim < 1 || brownian_dim < 1) throw ConfigError("2BSDE problem dimensions must be >= 1");
    if (x0.size() != dim) throw ConfigError("2BSDE initial state dimension mismatch");
    if (!(horizon_T > 0.0)) throw ConfigError("2BSDE horizon must be positive");
    if (fine_substeps < 1) throw ConfigError("fine_substeps must be >= 1");
    if (max_fine_dt < 0.0) throw ConfigError("max_fine_dt must be >= 0");
}

void ApproximatorSpec::validate() const {
    if (degree < 1) throw ConfigError("approximator degree must be >= 1");
    if (ridge < 0.0) throw ConfigError("approximator ridge weight must be >= 0");
}

namespace {

// Exponent vectors of all monomials with total degree <= D, constant first.
std::vector<std::vector<int>> monomials(int dim, int degree) {
    std::vector<std::vector<int>> out;
    // enumerate by total degree so the constant comes first
    for (int total = 0; total <= degree; ++total) {
        std::vector<int> f(dim, 0);
        std::function<void(int, int)> rec2 = [&](int k, int left) {
            if (k == dim - 1) {
                f[k] = left;
                out.push_back(f);
                return;
            }
            for (int p = left; p >= 0; --p) {
                f[k] = p;
                rec2(k + 1, left - p);
            }
        };
        rec2(0, total);
    }
    return out;
}

double ipow(double x, int p) {
    double r = 1.0;
    for (int k = 0; k < p; ++k) r *= x;
    return r;
}

// Polynomial surrogate in standardized coordinates u = (x - mean) / scale.
struct StepFit {
    Eigen::VectorXd coeffs;
    Eigen::VectorXd mean, scale;

    double value(const std::vector<std::vector<int>>& mono, const Eigen::VectorXd& x) const {
        const int d = static_cast<int>(mean.size());
        double y = 0.0;
        for (size_t j = 0; j < mono.size(); ++j) {
            double m = coeffs[j];
            for (int k = 0; k < d; ++k) m *= ipow((x[k] - mean[k]) / scale[k], mono[j][k]);
            y += m;
        }
        return y;
    }

    Eigen::VectorXd grad(const std::vector<std::vector<int>>& mono,
                         const Eigen::VectorXd& x) const {
        const int d = static_cast<int>(mean.size());
        Eigen::VectorXd u(d), g = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < d; ++k) u[k] = (x[k] - mean[k]) / scale[k];
        for (size_t j = 0; j < mono.size(); ++j) {
            for (int a = 0; a < d; ++a) {
                if (mono[j][a] == 0) continue;
                double m = coeffs[j] * mono[j][a] * ipow(u[a], mono[j][a] - 1) / scale[a];
                for (int k = 0; k < d; ++k)
                    if (k != a) m *= ipow(u[k], mono[j][k]);
                g[a] += m;
            }
        }
        return g;
    }

    Eigen::MatrixXd hess(const std::vector<std::vector<int>>& mono,
                         const Eigen::VectorXd& x) const {
        const int d = static_cast<int>(mean.size());
        Eigen::VectorXd u(d);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
        for (int k = 0; k < d; ++k) u[k] = (x[k] - mean[k]) / scale[k];
        for (size_t j = 0; j < mono.size(); ++j) {
            for (int a = 0; a < d; ++a) {
                for (int b = a; b < d; ++b) {
                    const int ea = mono[j][a], eb = mono[j][b];
                    double m;
                    if (a == b) {
                        if (ea < 2) continue;
                        m = coeffs[j] * ea * (ea - 1) * ipow(u[a], ea - 2) /
                            (scale[a] * scale[a]);
                    } else {
                        if (ea == 0 || eb == 0) continue;
                        m = coeffs[j] * ea * eb * ipow(u[a], ea - 1) * ipow(u[b], eb - 1) /
                            (scale[a] * scale[b]);
                    }
                    for (int k = 0; k < d; ++k)
                        if (k != a && k != b) m *= ipow(u[k], mono[j][k]);
                    H(a, b) += m;
                }
            }
        }
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < a; ++b) H(a, b) = H(b, a);
        return H;
    }
};

// Fixed block count keeps parallel reductions independent of the thread count.
constexpr int kReduceBlocks = 64;

}  // namespace

int ApproximatorSpec::n_features(int dim) const {
    return static_cast<int>(monomials(dim, degree).size());
}

void TwoBsdeSolution::write_report(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw SolverError("cannot open output file: " + path);
    std::fprintf(f, "y0");
    for (int k = 0; k < z0.size(); ++k) std::fprintf(f, ",z0_%d", k);
    std::fprintf(f, ",terminal_mismatch,n_steps,n_samples,seed\n");
    std::fprintf(f, "%.17g", y0);
    for (int k = 0; k < z0.size(); ++k) std::fprintf(f, ",%.17g", z0[k]);
    std::fprintf(f, ",%.17g,%ld,%ld,%llu\n", terminal_mismatch, n_steps, n_samples, seed);
    std::fclose(f);
}

TwoBsdeSolution solve_2bsde(const TwoBsdeProblem& problem, const ApproximatorSpec& approx,
                            long n_steps, long n_samples, unsigned long long seed) {
    problem.validate();
    approx.validate();
    if (n_steps < 2) throw ConfigError("solve_2bsde requires n_steps >= 2");
    const int d = problem.dim;
    const int m = problem.brownian_dim;
    const auto mono = monomials(d, approx.degree);
    const int p = static_cast<int>(mono.size());
    if (n_samples < 10L * p)
        throw ConfigError("solve_2bsde requires n_samples >= 10 x regression features");

    const double dt = problem.horizon_T / n_steps;
    int substeps = problem.fine_substeps;
    if (problem.max_fine_dt > 0.0)
        substeps = std::max<int>(substeps,
                                 static_cast<int>(std::ceil(dt / problem.max_fine_dt - 1e-12)));
    const double dt_fine = dt / substeps;
    const double sqrt_dtf = std::sqrt(dt_fine);

    // Forward ensemble, stored at the coarse (regression) times only.
    std::vector<double> X(static_cast<size_t>(n_samples) * (n_steps + 1) * d);
    auto xat = [&](long i, long n) {
        return Eigen::Map<Eigen::VectorXd>(&X[(static_cast<size_t>(i) * (n_steps + 1) + n) * d],
                                           d);
    };
    parallel_for(n_samples, [&](long i) {
        Eigen::VectorXd x = problem.x0;
        Eigen::VectorXd dw(m);
        xat(i, 0) = x;
        for (long n = 0; n < n_steps; ++n) {
            for (int s = 0; s < substeps; ++s) {
                const long fine = n * substeps + s;
                for (int k = 0; k < m; ++k)
                    dw[k] = sqrt_dtf * rng::gaussian(seed, static_cast<int>(i), fine, k);
                x += problem.forward_drift(x) * dt_fine + problem.forward_diffusion(x) * dw;
                if (!x.allFinite() || x.norm() > 1e8)
                    throw SolverError("forward ensemble blew up at step " + std::to_string(n));
            }
            xat(i, n + 1) = x;
        }
    });

    std::vector<double> Y(n_samples);
    parallel_for(n_samples, [&](long i) { Y[i] = problem.terminal(xat(i, n_steps)); });

    // Backward regression pass: fit the continuation value at each interior
    // time, read Z and Gamma off the surrogate, roll Y back one step.
    std::vector<StepFit> fits(n_steps);  // fits[n] is the surrogate at t_n, n >= 1
    for (long n = n_steps - 1; n >= 1; --n) {
        StepFit fit;
        fit.mean = Eigen::VectorXd::Zero(d);
        fit.scale = Eigen::VectorXd::Ones(d);
        for (long i = 0; i < n_samples; ++i) fit.mean += xat(i, n);
        fit.mean /= static_cast<double>(n_samples);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
        for (long i = 0; i < n_samples; ++i) var += (xat(i, n) - fit.mean).array().square().matrix();
        var /= static_cast<double>(n_samples);
        for (int k = 0; k < d; ++k) fit.scale[k] = std::max(std::sqrt(var[k]), 1e-12);

        // Normal equations accumulated in fixed-order blocks (deterministic
        // under any thread count).
        std::vector<Eigen::MatrixXd> Gb(kReduceBlocks, Eigen::MatrixXd::Zero(p, p));
        std::vector<Eigen::VectorXd> bb(kReduceBlocks, Eigen::VectorXd::Zero(p));
        const long chunk = (n_samples + kReduceBlocks - 1) / kReduceBlocks;
        parallel_for(kReduceBlocks, [&](long blk) {
            Eigen::VectorXd phi(p), u(d);
            const long lo = blk * chunk, hi = std::min(n_samples, lo + chunk);
            for (long i = lo; i < hi; ++i) {
                auto x = xat(i, n);
                for (int k = 0; k < d; ++k) u[k] = (x[k] - fit.mean[k]) / fit.scale[k];
                for (int j = 0; j < p; ++j) {
                    double mval = 1.0;
                    for (int k = 0; k < d; ++k) mval *= ipow(u[k], mono[j][k]);
                    phi[j] = mval;
                }
                Gb[blk].selfadjointView<Eigen::Lower>().rankUpdate(phi);
                bb[blk] += phi * Y[i];
            }
        });
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd rhsv = Eigen::VectorXd::Zero(p);
        for (int blk = 0; blk < kReduceBlocks; ++blk) {
            G += Gb[blk];
            rhsv += bb[blk];
        }
        G = Eigen::MatrixXd(G.selfadjointView<Eigen::Lower>());
        G /= static_cast<double>(n_samples);
        rhsv /= static_cast<double>(n_samples);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = es.eigenvalues().minCoeff();
        if (!(lmin > 0.0) || std::sqrt(lmax / lmin) > 1e10)
            throw SolverError(
                "regression features are rank deficient; increase n_samples or lower the "
                "polynomial degree");
        fit.coeffs =
            (G + approx.ridge * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(rhsv);
        fits[n] = fit;

        const double t_n = n * dt;
        parallel_for(n_samples, [&](long i) {
            auto x = xat(i, n);
            const Eigen::VectorXd xv = x;
            const double ypred = fit.value(mono, xv);
            const Eigen::VectorXd z = fit.grad(mono, xv);
            const Eigen::MatrixXd S = fit.hess(mono, xv);
            const Eigen::MatrixXd sig = problem.forward_diffusion(xv);
            const Eigen::VectorXd dx = xat(i, n + 1) - x;
            Y[i] = Y[i] - problem.driver(t_n, xv, ypred, z, S) * dt - z.dot(dx) -
                   0.5 * (sig.transpose() * S * sig).trace() * dt;
            if (!std::isfinite(Y[i]))
                throw SolverError("backward value became non-finite at step " +
                                  std::to_string(n));
        });
    }

    // Step 0: the ensemble starts at a single point, so the step-1 surrogate
    // supplies Z and Gamma there and y0 is the ensemble mean of the rollback.
    TwoBsdeSolution sol;
    sol.n_samples = n_samples;
    sol.n_steps = n_steps;
    sol.seed = seed;
    const StepFit& f1 = fits[1];
    sol.z0 = f1.grad(mono, problem.x0);
    sol.gamma0 = f1.hess(mono, problem.x0);
    const double y_ref = f1.value(mono, problem.x0);
    const Eigen::MatrixXd sig0 = problem.forward_diffusion(problem.x0);
    const double f0 = problem.driver(0.0, problem.x0, y_ref, sol.z0, sol.gamma0);
    const double ito0 = 0.5 * (sig0.transpose() * sol.gamma0 * sig0).trace();
    {
        std::vector<double> part(kReduceBlocks, 0.0);
        const long chunk = (n_samples + kReduceBlocks - 1) / kReduceBlocks;
        parallel_for(kReduceBlocks, [&](long blk) {
            const long lo = blk * chunk, hi = std::min(n_samples, lo + chunk);
            double acc = 0.0;
            for (long i = lo; i < hi; ++i) {
                const Eigen::VectorXd dx = xat(i, 1) - problem.x0;
                acc += Y[i] - f0 * dt - sol.z0.dot(dx) - ito0 * dt;
            }
            part[blk] = acc;
        });
        double sum = 0.0;
        for (double v : part) sum += v;
        sol.y0 = sum / static_cast<double>(n_samples);
    }
    if (!std::isfinite(sol.y0)) throw SolverError("backward value became non-finite at step 0");

    // Residual diagnostic: re-propagate Y forward through the fitted
    // surrogates and compare against the terminal data.
    {
        std::vector<double> part(kReduceBlocks, 0.0);
        const long chunk = (n_samples + kReduceBlocks - 1) / kReduceBlocks;
        parallel_for(kReduceBlocks, [&](long blk) {
            const long lo = blk * chunk, hi = std::min(n_samples, lo + chunk);
            double acc = 0.0;
            for (long i = lo; i < hi; ++i) {
                double y = sol.y0;
                {
                    const Eigen::VectorXd dx = xat(i, 1) - problem.x0;
                    y += f0 * dt + sol.z0.dot(dx) + ito0 * dt;
                }
                for (long n = 1; n < n_steps; ++n) {
                    const Eigen::VectorXd xv = xat(i, n);
                    const double ypred = fits[n].value(mono, xv);
                    const Eigen::VectorXd z = fits[n].grad(mono, xv);
                    const Eigen::MatrixXd S = fits[n].hess(mono, xv);
                    const Eigen::MatrixXd sig = problem.forward_diffusion(xv);
                    const Eigen::VectorXd dx = xat(i, n + 1) - xv;
                    y += problem.driver(n * dt, xv, ypred, z, S) * dt + z.dot(dx) +
                         0.5 * (sig.transpose() * S * sig).trace() * dt;
                }
                const double r = y - problem.terminal(xat(i, n_steps));
                acc += r * r;
            }
            part[blk] = acc;
        });
        double sum = 0.0;
        for (double v : part) sum += v;
        sol.terminal_mismatch = std::sqrt(sum / static_cast<double>(n_samples));
    }

    sol.step_coefficients.reserve(n_steps - 1);
    for (long n = 1; n < n_steps; ++n) sol.step_coefficients.push_back(fits[n].coeffs);
    return sol;
}

Driver make_lq_driver(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q0, const UncertaintyInterval& theta) {
    const Eigen::MatrixXd BBt = B * B.transpose();
    return [A, B, Q0, BBt, theta](double, const Eigen::VectorXd& x, double,
                                  const Eigen::VectorXd& z, const Eigen::MatrixXd& S) {
        const double bracket = (BBt.array() * S.array()).sum();
        const Eigen::VectorXd Bz = B.transpose() * z;
        return -g_nonlinearity(bracket, theta) - z.dot(A * x) + 0.5 * Bz.squaredNorm() -
               0.5 * x.dot(Q0 * x);
    };
}

Driver make_lq_driver(const MultiscaleLQModel& model) {
    const int ns = model.blocks.n_slow();
    const int nf = model.blocks.n_fast();
    Eigen::MatrixXd Q0 = Eigen::MatrixXd::Zero(ns + nf, ns + nf);
    Q0.topLeftCorner(ns, ns) = model.Q0;
    return make_lq_driver(model.full_A(), model.full_B(), Q0, model.sigma);
}

Driver make_lq_driver(const ReducedLQModel& model) {
    return make_lq_driver(model.A_bar, model.B_bar, model.Q0, model.sigma);
}

TwoBsdeProblem make_triad_qoi_problem(const TriadModel& model, TriadVariant which, double T,
                                      const Eigen::VectorXd& x0) {
    TwoBsdeProblem p;
    p.horizon_T = T;
    p.theta = model.lambda;
    p.terminal = [](const Eigen::VectorXd& x) { return x[0]; };
    const double lam_ref = model.lambda.midpoint();
    if (which == TriadVariant::full) {
        if (x0.size() != 3) throw ConfigError("full triad problem needs a 3-d initial state");
        p.dim = 3;
        p.brownian_dim = 1;
        p.x0 = x0;
        p.max_fine_dt = model.epsilon * model.epsilon * 1e-2;
        const double eps = model.epsilon;
        p.forward_drift = [model](const Eigen::VectorXd& x) -> Eigen::VectorXd {
            return triad_full_drift(model, x);
        };
        p.forward_diffusion = [lam_ref, eps](const Eigen::VectorXd&) -> Eigen::MatrixXd {
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 1);
            s(2, 0) = lam_ref / eps;
            return s;
        };
        const UncertaintyInterval lam = model.lambda;
        p.driver = [model, eps, lam](double, const Eigen::VectorXd& x, double,
                                     const Eigen::VectorXd& z, const Eigen::MatrixXd& S) {
            const double bracket = S(2, 2) / (eps * eps);
            return -g_term(bracket, lam, /*squared=*/true) - z.dot(triad_full_drift(model, x));
        };
    } else {
        if (x0.size() != 2) throw ConfigError("limit triad problem needs a 2-d initial state");
        p.dim = 2;
        p.brownian_dim = 1;
        p.x0 = x0;
        // A single Brownian driver in two dimensions leaves a one-fine-step
        // ensemble on a curve, which makes the first regression rank
        // deficient; at least two substeps restore full-dimensional support.
        p.fine_substeps = 2;
        p.max_fine_dt = 5e-3;
        const TriadLimit lim_ref(model.A1, model.A2, model.A3, lam_ref, model.gamma);
        p.forward_drift = [lim_ref](const Eigen::VectorXd& x) -> Eigen::VectorXd {
            return triad_limit_drift(lim_ref, Eigen::Vector2d(x[0], x[1]));
        };
        p.forward_diffusion = [lim_ref](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
            Eigen::Vector2d s = triad_limit_diffusion(lim_ref, Eigen::Vector2d(x[0], x[1]));
            Eigen::MatrixXd out(2, 1);
            out << s[0], s[1];
            return out;
        };
        const UncertaintyInterval lam = model.lambda;
        const double A1 = model.A1, A2 = model.A2, g2 = model.gamma * model.gamma;
        const TriadLimit lim_unit(model.A1, model.A2, model.A3, 1.0, model.gamma);
        p.driver = [lim_unit, lam, A1, A2, g2](double, const Eigen::VectorXd& x, double,
                                               const Eigen::VectorXd& z,
                                               const Eigen::MatrixXd& S) {
            const Eigen::Vector2d r(x[0], x[1]);
            const Eigen::Vector2d w(A1 * r[1], A2 * r[0]);
            const double bracket = (w.dot(S * w) + A1 * A2 * z.dot(r)) / g2;
            return -g_term(bracket, lam, /*squared=*/true) -
                   z.dot(triad_limit_drift_lambda_free(lim_unit, r));
        };
    }
    return p;
}

}  // namespace gmr
