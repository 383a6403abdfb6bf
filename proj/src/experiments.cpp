#include "gmr/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "gmr/errors.hpp"
#include "gmr/hjb_fd.hpp"
#include "gmr/models.hpp"
#include "gmr/sde_sim.hpp"
#include "gmr/sublinear.hpp"
#include "gmr/twobsde.hpp"

namespace gmr {

namespace fs = std::filesystem;

void write_atomic(const std::string& path, const std::function<void(const std::string&)>& writer) {
    const std::string tmp = path + ".tmp";
    writer(tmp);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw SolverError("cannot move output into place: " + path + ": " + ec.message());
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    write_atomic(path, [&](const std::string& tmp) {
        std::FILE* f = std::fopen(tmp.c_str(), "wb");
        if (!f) throw SolverError("cannot open output file: " + tmp);
        if (!contents.empty() && std::fwrite(contents.data(), 1, contents.size(), f) !=
                                     contents.size()) {
            std::fclose(f);
            throw SolverError("short write: " + tmp);
        }
        std::fclose(f);
    });
}

std::string ExperimentReport::summary() const {
    std::ostringstream out;
    out << "experiment: " << kind << "\n";
    char buf[64];
    for (const auto& [name, value] : headline) {
        std::snprintf(buf, sizeof buf, "%.10g", value);
        out << "  " << name << " = " << buf << "\n";
    }
    for (const auto& f : output_files) out << "  wrote " << f << "\n";
    std::snprintf(buf, sizeof buf, "%.2f", wall_seconds);
    out << "  wall seconds: " << buf << "\n";
    return out.str();
}

namespace {

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return (fs::path(cfg.output_dir) / name).string();
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

MultiscaleLQModel lq_model_from(const ExperimentConfig& cfg, double epsilon, double sigma_lo,
                                double sigma_hi, double T) {
    auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    BlockMatrices blocks(m(cfg.file.get_double("model", "a11")),
                         m(cfg.file.get_double("model", "a12")),
                         m(cfg.file.get_double("model", "a21")),
                         m(cfg.file.get_double("model", "a22")),
                         m(cfg.file.get_double("model", "b1")),
                         m(cfg.file.get_double("model", "b2")), m(0.0), m(0.0));
    const int p = static_cast<int>(cfg.file.get_long_or("model", "fast_scaling_exponent", 2));
    return MultiscaleLQModel(blocks, epsilon, p, m(cfg.file.get_double_or("model", "q0", 0.0)),
                             m(cfg.file.get_double("model", "q1")), T,
                             UncertaintyInterval(sigma_lo, sigma_hi));
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Short form for headline labels; CSV contents keep full precision.
std::string label_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

ExperimentReport run_lq_table(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    const auto epsilons = cfg.file.get_list("run", "epsilons");
    const double sigma_lo = cfg.file.get_double("run", "sigma_lo");
    const double sigma_hi = cfg.file.get_double("run", "sigma_hi");
    const double T = cfg.file.get_double("run", "horizon_T");
    const auto x0 = cfg.file.get_list("run", "x0");
    if (x0.size() != 2) throw ConfigError("[run] x0 must have 2 components");
    if (epsilons.empty()) throw ConfigError("[run] epsilons must be nonempty");
    const UncertaintyInterval sigma(sigma_lo, sigma_hi);

    const int slow_cells = static_cast<int>(cfg.file.get_long_or("grid", "slow_cells", 40));
    const int fast_cells = static_cast<int>(cfg.file.get_long_or("grid", "fast_cells", 48));
    const double shw = cfg.file.get_double_or("grid", "slow_halfwidth", 2.5);
    const double fhw = cfg.file.get_double_or("grid", "fast_halfwidth", 4.5);

    // Reduced value is epsilon-free: solve the 1-D averaged problem once.
    MultiscaleLQModel proto = lq_model_from(cfg, epsilons.front(), sigma_lo, sigma_hi, T);
    ReducedLQModel red = reduce_lq(proto);
    GHjbProblem red_problem = make_lq_ghjb(red.A_bar, red.B_bar, red.Q0, red.Q1);
    GridSpec red_grid{{{x0[0] - shw, x0[0] + shw, slow_cells}}, 0.0, T};
    ValueField red_vf = solve_ghjb(red_problem, sigma, red_grid);
    Eigen::VectorXd r0(1);
    r0 << x0[0];
    const double v_reduced = red_vf.value_at(red_vf.time_index(0.0), r0);

    std::string csv = "epsilon,v_full,v_reduced,delta_v\n";
    const Eigen::Vector2d x0v(x0[0], x0[1]);
    for (double eps : epsilons) {
        MultiscaleLQModel model = lq_model_from(cfg, eps, sigma_lo, sigma_hi, T);
        Eigen::MatrixXd Q0f = Eigen::MatrixXd::Zero(2, 2), Q1f = Eigen::MatrixXd::Zero(2, 2);
        Q0f(0, 0) = model.Q0(0, 0);
        Q1f(0, 0) = model.Q1(0, 0);
        GHjbProblem full = make_lq_ghjb(model.full_A(), model.full_B(), Q0f, Q1f);
        GridSpec grid{{{x0[0] - shw, x0[0] + shw, slow_cells},
                       {x0[1] - fhw, x0[1] + fhw, fast_cells}},
                      0.0,
                      T};
        ValueField vf = solve_ghjb(full, sigma, grid);
        const double v_full = vf.value_at(vf.time_index(0.0), x0v);
        const double delta = std::abs(v_full - v_reduced);
        csv += csv_num(eps) + "," + csv_num(v_full) + "," + csv_num(v_reduced) + "," +
               csv_num(delta) + "\n";
        rep.headline.emplace_back("delta_v(eps=" + label_num(eps) + ")", delta);
    }
    rep.headline.emplace_back("v_reduced", v_reduced);

    const std::string path = out_path(cfg, "lq_table.csv");
    write_file_atomic(path, csv);
    rep.output_files.push_back(path);
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_triad_case(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    const UncertaintyInterval lambda(cfg.file.get_double("model", "lambda_lo"),
                                     cfg.file.get_double("model", "lambda_hi"));
    const TriadModel model(cfg.file.get_double("model", "a1"),
                           cfg.file.get_double("model", "a2"),
                           cfg.file.get_double("model", "a3"), lambda,
                           cfg.file.get_double("model", "epsilon"),
                           cfg.file.get_double_or("model", "gamma", 1.0));
    const double T = cfg.file.get_double("run", "horizon_T");
    const auto x0 = cfg.file.get_list("run", "x0");
    if (x0.size() != 3) throw ConfigError("[run] x0 must have 3 components");
    const long n_steps = cfg.file.get_long_or("run", "n_steps", 50);
    const long n_samples = cfg.file.get_long_or("run", "n_samples", 100000);
    ApproximatorSpec approx;
    approx.degree = static_cast<int>(cfg.file.get_long_or("run", "degree", 2));

    Eigen::Vector3d x0f(x0[0], x0[1], x0[2]);
    Eigen::Vector2d r0(x0[0], x0[1]);

    TwoBsdeProblem full = make_triad_qoi_problem(model, TriadVariant::full, T, x0f);
    TwoBsdeSolution sol_full = solve_2bsde(full, approx, n_steps, n_samples, cfg.seed);

    TwoBsdeProblem limit = make_triad_qoi_problem(model, TriadVariant::limit, T, r0);
    TwoBsdeSolution sol_limit = solve_2bsde(limit, approx, n_steps, n_samples, cfg.seed);

    const double hw = cfg.file.get_double_or("grid", "halfwidth", 4.0);
    const int cells = static_cast<int>(cfg.file.get_long_or("grid", "cells", 96));
    GHjbProblem fd_problem = make_triad_limit_ghjb(model);
    GridSpec grid{{{-hw, hw, cells}, {-hw, hw, cells}}, 0.0, T};
    ValueField vf = solve_ghjb(fd_problem, lambda, grid);
    const double v_fd = vf.value_at(vf.time_index(0.0), r0);

    const double gap = std::abs(sol_full.y0 - sol_limit.y0) /
                       std::max(1e-300, std::abs(sol_limit.y0));

    std::string csv = "v_full,v_limit_2bsde,v_limit_fd,gap_rel\n";
    csv += csv_num(sol_full.y0) + "," + csv_num(sol_limit.y0) + "," + csv_num(v_fd) + "," +
           csv_num(gap) + "\n";
    const std::string path = out_path(cfg, "triad_case.csv");
    write_file_atomic(path, csv);
    rep.output_files.push_back(path);

    const std::string full_rep = out_path(cfg, "twobsde_full.csv");
    write_atomic(full_rep, [&](const std::string& tmp) { sol_full.write_report(tmp); });
    rep.output_files.push_back(full_rep);
    const std::string lim_rep = out_path(cfg, "twobsde_limit.csv");
    write_atomic(lim_rep, [&](const std::string& tmp) { sol_limit.write_report(tmp); });
    rep.output_files.push_back(lim_rep);

    rep.headline = {{"v_full", sol_full.y0},
                    {"v_limit_2bsde", sol_limit.y0},
                    {"v_limit_fd", v_fd},
                    {"gap_rel", gap}};
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_strong_rate(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    const auto epsilons = cfg.file.get_list("run", "epsilons");
    const double sigma_lo = cfg.file.get_double("run", "sigma_lo");
    const double sigma_hi = cfg.file.get_double("run", "sigma_hi");
    const double T = cfg.file.get_double("run", "horizon_T");
    const auto x0 = cfg.file.get_list("run", "x0");
    if (x0.size() != 2) throw ConfigError("[run] x0 must have 2 components");
    const int n_paths = static_cast<int>(cfg.file.get_long_or("run", "n_paths", 400));
    const int n_theta = static_cast<int>(cfg.file.get_long_or("run", "n_theta", 1));
    const double dt_scale = cfg.file.get_double_or("run", "dt_scale", 0.01);
    const int p = static_cast<int>(cfg.file.get_long_or("model", "fast_scaling_exponent", 2));

    MultiscaleLQModel proto = lq_model_from(cfg, epsilons.front(), sigma_lo, sigma_hi, T);
    ReducedLQModel red = reduce_lq(proto);
    const Eigen::Vector2d x0v(x0[0], x0[1]);

    CoupledFamily family;
    family.make = [cfg, x0v, red, sigma_lo, sigma_hi,
                   T](double eps, double theta) -> std::pair<SystemSpec, SystemSpec> {
        MultiscaleLQModel model = lq_model_from(cfg, eps, sigma_lo, sigma_hi, T);
        const Eigen::MatrixXd A = model.full_A();
        const Eigen::MatrixXd B = model.full_B();
        const double s = std::sqrt(theta);
        SystemSpec full{[A](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x; },
                        [B, s](const Eigen::VectorXd&) -> Eigen::MatrixXd { return s * B; },
                        2,
                        1,
                        x0v,
                        1};
        const Eigen::MatrixXd Ab = red.A_bar, Bb = red.B_bar;
        Eigen::VectorXd r0(1);
        r0 << x0v[0];
        SystemSpec reduced{[Ab](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Ab * x; },
                           [Bb, s](const Eigen::VectorXd&) -> Eigen::MatrixXd { return s * Bb; },
                           1,
                           1,
                           r0,
                           1};
        return {full, reduced};
    };
    family.dt_for_eps = [dt_scale, p, T](double eps) {
        const double raw = dt_scale * std::pow(eps, p);
        const long n = std::max<long>(1, static_cast<long>(std::ceil(T / raw - 1e-12)));
        return T / n;
    };

    SimConfig base;
    base.dt = family.dt_for_eps(epsilons.front());
    base.horizon_T = T;
    base.n_paths = n_paths;
    base.master_seed = cfg.seed;
    base.initial_state = x0v;
    base.store_increments = false;

    const UncertaintyInterval sigma(sigma_lo, sigma_hi);
    const ThetaGrid grid = (n_theta <= 1 || sigma.degenerate())
                               ? ThetaGrid::singleton(sigma_lo)
                               : ThetaGrid::uniform(sigma, n_theta);
    StrongErrorReport report = strong_error_rate(family, epsilons, base, grid);

    const std::string path = out_path(cfg, "strong_rate.csv");
    write_atomic(path, [&](const std::string& tmp) { report.write_csv(tmp); });
    rep.output_files.push_back(path);
    for (size_t i = 0; i < report.epsilons.size(); ++i)
        rep.headline.emplace_back("error(eps=" + label_num(report.epsilons[i]) + ")",
                                  report.errors[i]);
    rep.headline.emplace_back("slope", report.fitted_slope);
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_sigma_star(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    const Eigen::MatrixXd A = m(cfg.file.get_double("model", "a_bar"));
    const Eigen::MatrixXd B = m(cfg.file.get_double("model", "b_bar"));
    const Eigen::MatrixXd Q0 = m(cfg.file.get_double_or("model", "q0", 0.0));
    const Eigen::MatrixXd Q1 = m(cfg.file.get_double("model", "terminal_weight"));
    const UncertaintyInterval sigma(cfg.file.get_double("run", "sigma_lo"),
                                    cfg.file.get_double("run", "sigma_hi"));
    const double T = cfg.file.get_double("run", "horizon_T");
    GridSpec grid{{{cfg.file.get_double_or("grid", "lo", -3.0),
                    cfg.file.get_double_or("grid", "hi", 3.0),
                    static_cast<int>(cfg.file.get_long_or("grid", "cells", 60))}},
                  0.0,
                  T};
    std::vector<double> store = {0.0, 0.5 * T, T};
    if (cfg.file.has("run", "store_times")) store = cfg.file.get_list("run", "store_times");

    GHjbProblem problem = make_lq_ghjb(A, B, Q0, Q1);
    ValueField vf = solve_ghjb(problem, sigma, grid, store);
    SigmaStarField sf = sigma_star_field(vf, sigma, problem.bracket);

    double smin = sigma.sigma_hi, smax = sigma.sigma_lo;
    for (const auto& slice : sf.sigma_star)
        for (double s : slice) {
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }

    const std::string vpath = out_path(cfg, "value.csv");
    write_atomic(vpath, [&](const std::string& tmp) { vf.write_csv(tmp); });
    rep.output_files.push_back(vpath);
    const std::string spath = out_path(cfg, "sigma_star.csv");
    write_atomic(spath, [&](const std::string& tmp) { sf.write_csv(tmp); });
    rep.output_files.push_back(spath);

    rep.headline = {{"sigma_star_min", smin}, {"sigma_star_max", smax}};
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_pitchfork_scan(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    const auto thetas = cfg.file.get_list("run", "thetas");
    const double r_lo = cfg.file.get_double_or("run", "r_lo", -2.0);
    const double r_hi = cfg.file.get_double_or("run", "r_hi", 2.0);
    const long n_grid = cfg.file.get_long_or("run", "n_grid", 401);
    const long n_scan = cfg.file.get_long_or("run", "n_scan", 200001);
    if (!(r_lo < r_hi) || n_grid < 2 || n_scan < 2)
        throw ConfigError("pitchfork scan range/grid invalid");
    for (double th : thetas)
        if (th < 0.0 || th > 1.0) throw ConfigError("[run] thetas must lie in [0, 1]");

    std::string field_csv = "theta,r,F\n";
    std::string roots_csv = "theta,root,stable\n";
    std::string census_csv = "theta,n_roots,n_stable\n";
    for (double th : thetas) {
        for (long i = 0; i < n_grid; ++i) {
            const double r = r_lo + (r_hi - r_lo) * i / (n_grid - 1);
            field_csv += csv_num(th) + "," + csv_num(r) + "," +
                         csv_num(pitchfork_limit_vector_field(th, r)) + "\n";
        }
        // Root census by sign-change scan plus bisection refinement.
        std::vector<double> roots;
        double prev_r = r_lo, prev_f = pitchfork_limit_vector_field(th, r_lo);
        for (long i = 1; i < n_scan; ++i) {
            const double r = r_lo + (r_hi - r_lo) * i / (n_scan - 1);
            const double f = pitchfork_limit_vector_field(th, r);
            if (prev_f == 0.0) {
                roots.push_back(prev_r);
            } else if (prev_f * f < 0.0) {
                double a = prev_r, b = r, fa = prev_f;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (a + b);
                    const double fm = pitchfork_limit_vector_field(th, mid);
                    if (fa * fm <= 0.0) {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                roots.push_back(0.5 * (a + b));
            }
            prev_r = r;
            prev_f = f;
        }
        if (prev_f == 0.0) roots.push_back(prev_r);
        int n_stable = 0;
        for (double root : roots) {
            const double slope = -3.0 * root * root + (1.0 - 3.0 * th);
            const bool stable = slope < 0.0;
            n_stable += stable ? 1 : 0;
            roots_csv += csv_num(th) + "," + csv_num(root) + "," + (stable ? "1" : "0") + "\n";
        }
        census_csv += csv_num(th) + "," + std::to_string(roots.size()) + "," +
                      std::to_string(n_stable) + "\n";
        rep.headline.emplace_back("n_roots(theta=" + label_num(th) + ")",
                                  static_cast<double>(roots.size()));
        rep.headline.emplace_back("n_stable(theta=" + label_num(th) + ")",
                                  static_cast<double>(n_stable));
    }

    for (auto [name, body] : {std::pair<std::string, std::string*>{"pitchfork_field.csv",
                                                                   &field_csv},
                              {"pitchfork_roots.csv", &roots_csv},
                              {"pitchfork_census.csv", &census_csv}}) {
        const std::string path = out_path(cfg, name);
        write_file_atomic(path, *body);
        rep.output_files.push_back(path);
    }
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_worst_case(const ExperimentConfig& cfg) {
    Timer timer;
    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);

    const auto epsilons = cfg.file.get_list("run", "epsilons");
    const UncertaintyInterval theta(cfg.file.get_double("run", "theta_lo"),
                                    cfg.file.get_double("run", "theta_hi"));
    const int n_theta = static_cast<int>(cfg.file.get_long_or("run", "n_theta", 5));
    const int n_paths = static_cast<int>(cfg.file.get_long_or("run", "n_paths", 200));
    const double T = cfg.file.get_double("run", "horizon_T");
    const auto x0 = cfg.file.get_list("run", "x0");
    if (x0.size() != 2) throw ConfigError("[run] x0 must have 2 components (r0, u0)");
    const double dt_scale = cfg.file.get_double_or("run", "dt_scale", 0.01);
    const ThetaGrid grid = ThetaGrid::uniform(theta, n_theta);

    std::string csv = "epsilon,value,argmax_theta\n";
    for (double eps : epsilons) {
        const double raw = dt_scale * eps;
        const long n = std::max<long>(1, static_cast<long>(std::ceil(T / raw - 1e-12)));
        const double dt = T / n;

        auto factory = [&](double th) -> std::vector<double> {
            // Deterministic averaged trajectory r' = F(r, theta), RK4.
            double r = x0[0];
            const long n_ode = std::max<long>(1, static_cast<long>(std::ceil(T / 1e-4)));
            const double h = T / n_ode;
            for (long k = 0; k < n_ode; ++k) {
                const double k1 = pitchfork_limit_vector_field(th, r);
                const double k2 = pitchfork_limit_vector_field(th, r + 0.5 * h * k1);
                const double k3 = pitchfork_limit_vector_field(th, r + 0.5 * h * k2);
                const double k4 = pitchfork_limit_vector_field(th, r + h * k3);
                r += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
            }
            const double r_limit = r;

            const double eps_c = eps;
            DriftFn drift = [eps_c](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                Eigen::Vector2d b(x[0] - x[1] * x[1] * x[1], (x[0] - x[1]) / eps_c);
                return b;
            };
            const double noise = std::sqrt(2.0 * th / eps_c);
            DiffusionFn diffusion = [noise](const Eigen::VectorXd&) -> Eigen::MatrixXd {
                Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 1);
                s(1, 0) = noise;
                return s;
            };
            SimConfig sim;
            sim.dt = dt;
            sim.horizon_T = T;
            sim.n_paths = n_paths;
            sim.master_seed = cfg.seed;
            sim.initial_state = Eigen::Vector2d(x0[0], x0[1]);
            sim.store_increments = false;
            PathEnsemble ens = simulate(drift, diffusion, sim, 1);
            std::vector<double> out(n_paths);
            const long last = ens.n_steps_p1() - 1;
            for (int pth = 0; pth < n_paths; ++pth)
                out[pth] = std::abs(ens.state(pth, last, 0) - r_limit);
            return out;
        };
        WorstCaseEstimate est = worst_case_expectation(factory, grid);
        csv += csv_num(eps) + "," + csv_num(est.value) + "," + csv_num(est.argmax_theta) + "\n";
        rep.headline.emplace_back("worst_case(eps=" + label_num(eps) + ")", est.value);
    }

    const std::string path = out_path(cfg, "worst_case.csv");
    write_file_atomic(path, csv);
    rep.output_files.push_back(path);
    rep.wall_seconds = timer.elapsed();
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::lq_table: return run_lq_table(cfg);
        case ExperimentKind::triad_case: return run_triad_case(cfg);
        case ExperimentKind::strong_rate: return run_strong_rate(cfg);
        case ExperimentKind::sigma_star: return run_sigma_star(cfg);
        case ExperimentKind::pitchfork_scan: return run_pitchfork_scan(cfg);
        case ExperimentKind::worst_case: return run_worst_case(cfg);
    }
    throw ConfigError("invalid experiment kind value");
}

}  // namespace gmr
