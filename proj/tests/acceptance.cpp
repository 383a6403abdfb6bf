// Acceptance suite: each criterion is selected by a single integer argument
// and prints one PASS/FAIL line per sub-check plus a criterion summary line.
// All tolerances are pinned here.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmr/config.hpp"
#include "gmr/errors.hpp"
#include "gmr/experiments.hpp"
#include "gmr/hjb_fd.hpp"
#include "gmr/models.hpp"
#include "gmr/rng.hpp"
#include "gmr/sde_sim.hpp"
#include "gmr/sublinear.hpp"
#include "gmr/twobsde.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace gmr;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& label) {
    std::printf("  [%s] %s\n", ok ? "PASS" : "FAIL", label.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

MatrixXd mat1(double a) {
    MatrixXd m(1, 1);
    m << a;
    return m;
}

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string kLqTableConfig =
    "[experiment]\n"
    "kind = lq_table\n"
    "seed = 1\n"
    "[model]\n"
    "a11 = -2\n"
    "a12 = -1\n"
    "a21 = 1\n"
    "a22 = -2\n"
    "b1 = 0.1\n"
    "b2 = 2\n"
    "q1 = 2\n"
    "[run]\n"
    "epsilons = 0.3, 0.2, 0.1\n"
    "sigma_lo = 0.8\n"
    "sigma_hi = 1.0\n"
    "horizon_T = 0.1\n"
    "x0 = 1, 0.5\n";

const std::string kTriadCase1Config =
    "[experiment]\n"
    "kind = triad_case\n"
    "seed = 1\n"
    "[model]\n"
    "a1 = 1\n"
    "a2 = 1\n"
    "a3 = -2\n"
    "lambda_lo = 0.8\n"
    "lambda_hi = 1.2\n"
    "epsilon = 0.2\n"
    "[run]\n"
    "horizon_T = 0.1\n"
    "x0 = 1, -2, -2\n";

ExperimentConfig config_from(const std::string& text, const fs::path& out_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_file(ConfigFile::parse_string(text));
    cfg.output_dir = out_dir.string();
    return cfg;
}

// --- criterion 1: full/reduced value gap table for the averaged regulator ---

void criterion1() {
    const fs::path dir = fresh_dir("acceptance_c1");
    ExperimentReport rep = run_lq_table(config_from(kLqTableConfig, dir));
    // headline = delta_v per epsilon (in input order), then v_reduced.
    const double d03 = rep.headline[0].second;
    const double d02 = rep.headline[1].second;
    const double d01 = rep.headline[2].second;
    check(d03 >= 0.10 && d03 <= 0.20, "delta_v(eps=0.3) = " + fmt(d03) + " in [0.10, 0.20]");
    check(d02 >= 0.03 && d02 <= 0.09, "delta_v(eps=0.2) = " + fmt(d02) + " in [0.03, 0.09]");
    check(d01 >= 0.005 && d01 <= 0.03, "delta_v(eps=0.1) = " + fmt(d01) + " in [0.005, 0.03]");
    check(d03 > d02 && d02 > d01, "delta_v strictly decreasing in epsilon");
    fs::remove_all(dir);
}

// --- criterion 2: triad quantity of interest, full vs homogenised limit ---

void triad_case(double a1, double a2, double a3, double lam_lo, double lam_hi, double T,
                double target_full, double target_limit, double tol, double gap_tol) {
    const TriadModel model(a1, a2, a3, UncertaintyInterval{lam_lo, lam_hi}, 0.2);
    Eigen::VectorXd x_full(3);
    x_full << 1.0, -2.0, -2.0;
    Eigen::VectorXd r0(2);
    r0 << 1.0, -2.0;

    ApproximatorSpec approx;
    const long n_steps = 50, n_samples = 100000;
    auto full = solve_2bsde(make_triad_qoi_problem(model, TriadVariant::full, T, x_full), approx,
                            n_steps, n_samples, 1);
    auto limit = solve_2bsde(make_triad_qoi_problem(model, TriadVariant::limit, T, r0), approx,
                             n_steps, n_samples, 1);
    const double gap = std::abs(full.y0 - limit.y0) / std::max(1e-300, std::abs(limit.y0));

    const std::string tag = "A=(" + fmt(a1) + "," + fmt(a2) + "," + fmt(a3) + ")";
    check(std::abs(full.y0 - target_full) <= tol,
          tag + " v_full = " + fmt(full.y0) + " within " + fmt(tol) + " of " + fmt(target_full));
    check(std::abs(limit.y0 - target_limit) <= tol, tag + " v_limit = " + fmt(limit.y0) +
                                                        " within " + fmt(tol) + " of " +
                                                        fmt(target_limit));
    check(gap <= gap_tol, tag + " relative gap = " + fmt(gap) + " <= " + fmt(gap_tol));
}

void criterion2() {
    triad_case(1.0, 1.0, -2.0, 0.8, 1.2, 0.1, 0.9291, 0.9326, 0.03, 0.02);
    triad_case(1.0, 2.0, -3.0, 0.6, 1.2, 0.5, 1.3202, 1.3549, 0.05, 0.05);
    triad_case(0.75, 0.25, -1.0, 1.0, 2.0, 0.1, 0.9752, 0.9601, 0.03, 0.03);
}

// --- criterion 3: both solvers reduce to the classical Riccati solution ---

void criterion3() {
    const MatrixXd A = mat1(-2.5), B = mat1(-0.9), Q0 = mat1(0.0), Q1 = mat1(2.0);
    const double T = 0.1;
    const LQProblemSpec oracle{A, B, Q0, Q1, T};
    const GHjbProblem fd_problem = make_lq_ghjb(A, B, Q0, Q1);
    const GridSpec grid{{{-3.0, 3.0, 60}}, 0.0, T};

    for (double sigma : {0.8, 1.0}) {
        const double want = riccati_value(oracle, sigma, 0.0, vec1(1.0));
        const UncertaintyInterval degenerate{sigma, sigma};

        ValueField vf = solve_ghjb(fd_problem, degenerate, grid);
        const double v_fd = vf.value_at(vf.time_index(0.0), vec1(1.0));
        const double err_fd = std::abs(v_fd - want) / std::abs(want);
        check(err_fd <= 0.01, "FD vs Riccati at sigma=" + fmt(sigma) + ": rel err " +
                                  fmt(err_fd) + " <= 0.01");

        TwoBsdeProblem p;
        p.forward_drift = [A](const VectorXd& x) { return VectorXd(A * x); };
        p.forward_diffusion = [B, sigma](const VectorXd&) {
            return MatrixXd(std::sqrt(sigma) * B);
        };
        p.dim = 1;
        p.brownian_dim = 1;
        p.x0 = vec1(1.0);
        p.horizon_T = T;
        p.theta = degenerate;
        p.driver = make_lq_driver(A, B, Q0, degenerate);
        p.terminal = [](const VectorXd& x) { return x(0) * x(0); };
        ApproximatorSpec approx;
        auto sol = solve_2bsde(p, approx, 50, 50000, 1);
        const double err_bsde = std::abs(sol.y0 - want) / std::abs(want);
        check(err_bsde <= 0.02, "2BSDE vs Riccati at sigma=" + fmt(sigma) + ": rel err " +
                                    fmt(err_bsde) + " <= 0.02");
    }
}

// --- criterion 4: pathwise invariant of the homogenised triad dynamics ---

double median_invariant_drift(double dt) {
    const TriadLimit limit(1.0, 1.0, -2.0, 1.0);
    SimConfig c;
    c.dt = dt;
    c.horizon_T = 0.5;
    c.n_paths = 100;
    c.master_seed = 2026;
    c.initial_state = Eigen::Vector2d(1.0, -2.0);
    c.store_increments = false;
    auto ens = simulate(
        [limit](const VectorXd& x) {
            return VectorXd(triad_limit_drift(limit, Eigen::Vector2d(x[0], x[1])));
        },
        [limit](const VectorXd& x) {
            Eigen::MatrixXd s(2, 1);
            s.col(0) = triad_limit_diffusion(limit, Eigen::Vector2d(x[0], x[1]));
            return s;
        },
        c, 1);
    const double I0 = conserved_quantity(1.0, 1.0, Eigen::Vector2d(1.0, -2.0));
    std::vector<double> rel(100);
    const long last = ens.n_steps_p1() - 1;
    for (int p = 0; p < 100; ++p) {
        const Eigen::Vector2d rT(ens.state(p, last, 0), ens.state(p, last, 1));
        rel[static_cast<std::size_t>(p)] =
            std::abs(conserved_quantity(1.0, 1.0, rT) - I0) / std::max(1.0, std::abs(I0));
    }
    std::nth_element(rel.begin(), rel.begin() + 50, rel.end());
    return rel[50];
}

void criterion4() {
    const double med = median_invariant_drift(1e-4);
    const double med_half = median_invariant_drift(5e-5);
    check(med <= 0.05, "median relative invariant drift at dt=1e-4: " + fmt(med) + " <= 0.05");
    check(med >= 1.5 * med_half, "halving dt improves the median by " + fmt(med / med_half) +
                                     "x (>= 1.5x)");
}

// --- criterion 5: limit drift vanishes at the analytic equilibria ---

void criterion5() {
    struct Case {
        double a1, a2, a3, lam;
    };
    for (const Case& cs : {Case{1.0, 1.0, -2.0, 1.0}, Case{1.0, 2.0, -3.0, 1.2},
                           Case{0.75, 0.25, -1.0, 2.0}}) {
        const TriadLimit limit(cs.a1, cs.a2, cs.a3, cs.lam);
        double worst = 0.0;
        for (const auto& eq : triad_equilibria(cs.a1, cs.a2, cs.a3, cs.lam))
            worst = std::max(worst, triad_limit_drift(limit, eq).norm());
        check(worst <= 1e-12, "A=(" + fmt(cs.a1) + "," + fmt(cs.a2) + "," + fmt(cs.a3) +
                                  "): max |f(equilibrium)| = " + fmt(worst) + " <= 1e-12");
    }
}

// --- criterion 6: strong averaging rate of the coupled LQ pair ---

void criterion6() {
    const fs::path dir = fresh_dir("acceptance_c6");
    ExperimentConfig cfg = config_from(
        "[experiment]\n"
        "kind = strong_rate\n"
        "seed = 1\n"
        "[model]\n"
        "a11 = -2\n"
        "a12 = -1\n"
        "a21 = 1\n"
        "a22 = -2\n"
        "b1 = 0.1\n"
        "b2 = 2\n"
        "q1 = 2\n"
        "[run]\n"
        "epsilons = 0.4, 0.2, 0.1, 0.05\n"
        "sigma_lo = 1.0\n"
        "sigma_hi = 1.0\n"
        "horizon_T = 0.5\n"
        "x0 = 1, 0.5\n",
        dir);
    ExperimentReport rep = run_strong_rate(cfg);
    const double slope = rep.headline.back().second;
    check(slope >= 0.7 && slope <= 1.3, "log-log strong-error slope = " + fmt(slope) +
                                            " in [0.7, 1.3]");
    fs::remove_all(dir);
}

// --- criterion 7: worst-case endpoint law under convexity/concavity ---

void criterion7() {
    const UncertaintyInterval sigma{0.8, 1.2};
    const GridSpec grid{{{-3.0, 3.0, 40}}, 0.0, 0.5};
    for (double weight : {2.0, -2.0}) {
        GHjbProblem p = make_lq_ghjb(mat1(-2.5), mat1(-0.9), mat1(0.0), mat1(weight));
        ValueField vf = solve_ghjb(p, sigma, grid, {0.0, 0.25, 0.5});
        SigmaStarField sf = sigma_star_field(vf, sigma, p.bracket);
        const double expected = weight > 0.0 ? sigma.sigma_hi : sigma.sigma_lo;
        bool all = true;
        for (const auto& slice : sf.sigma_star)
            for (double s : slice) all = all && (s == expected);
        check(all, std::string(weight > 0.0 ? "convex" : "concave") +
                       " terminal: sigma* identically " + fmt(expected) + " on every node/time");
    }
}

// --- criterion 8: sublinear-expectation axioms on shared ensembles ---

void criterion8() {
    const ThetaGrid grid = ThetaGrid::uniform(UncertaintyInterval{0.5, 2.0}, 5);
    const int n = 1000;

    auto theta_index = [&grid](double theta) {
        for (std::size_t j = 0; j < grid.values.size(); ++j)
            if (grid.values[j] == theta) return static_cast<std::uint64_t>(j);
        throw SolverError("theta not on the grid");
    };
    // Shared sample streams: every functional draws the same underlying noise.
    auto sample = [&](double theta, int i, std::uint64_t channel) {
        return (1.0 + theta) * rng::gaussian(404, theta_index(theta),
                                             static_cast<std::uint64_t>(i), channel);
    };
    auto make_factory = [&](auto fn) {
        return [fn](double theta) {
            std::vector<double> out(n);
            for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(theta, i);
            return out;
        };
    };

    EnsembleFactory fx = make_factory([&](double th, int i) { return sample(th, i, 0); });
    EnsembleFactory fy = make_factory([&](double th, int i) { return sample(th, i, 1); });
    EnsembleFactory fxy =
        make_factory([&](double th, int i) { return sample(th, i, 0) + sample(th, i, 1); });
    EnsembleFactory fscaled = make_factory([&](double th, int i) { return 2.5 * sample(th, i, 0); });
    EnsembleFactory fdominating =
        make_factory([&](double th, int i) { return sample(th, i, 0) + std::abs(sample(th, i, 1)); });
    EnsembleFactory fconst = make_factory([&](double, int) { return 3.25; });

    const double ex = worst_case_expectation(fx, grid).value;
    const double ey = worst_case_expectation(fy, grid).value;
    const double exy = worst_case_expectation(fxy, grid).value;
    const double escaled = worst_case_expectation(fscaled, grid).value;
    const double edom = worst_case_expectation(fdominating, grid).value;
    const double econst = worst_case_expectation(fconst, grid).value;

    const double fp_slack = 1e-12;  // summation rounding only
    check(exy <= ex + ey + fp_slack, "sub-additivity: E(X+Y) = " + fmt(exy) +
                                         " <= E(X) + E(Y) = " + fmt(ex + ey));
    check(std::abs(escaled - 2.5 * ex) <= fp_slack,
          "positive homogeneity: E(2.5 X) = " + fmt(escaled) + " = 2.5 E(X) = " + fmt(2.5 * ex));
    check(ex <= edom, "monotonicity: X <= X + |Y| pointwise gives E(X) = " + fmt(ex) +
                          " <= " + fmt(edom));
    check(econst == 3.25, "constant preservation: E(3.25) = " + fmt(econst));
}

// --- criterion 9: pitchfork root census across the bifurcation ---

void criterion9() {
    const fs::path dir = fresh_dir("acceptance_c9");
    ExperimentConfig cfg = config_from(
        "[experiment]\n"
        "kind = pitchfork_scan\n"
        "[run]\n"
        "thetas = 0.2833333333333333, 0.3833333333333333, 0.2, 0.5\n",
        dir);
    ExperimentReport rep = run_pitchfork_scan(cfg);
    // headline pairs (n_roots, n_stable) follow the theta input order.
    check(rep.headline[0].second == 3.0, "theta = 1/3 - 0.05: 3 roots");
    check(rep.headline[2].second == 1.0, "theta = 1/3 + 0.05: 1 root");
    check(rep.headline[5].second == 2.0, "theta = 0.2: 2 stable equilibria");
    check(rep.headline[7].second == 1.0, "theta = 0.5: 1 stable equilibrium");
    fs::remove_all(dir);
}

// --- criterion 10: byte-identical reruns of the headline experiments ---

void criterion10() {
    auto run_twice = [](const std::string& config_text, const std::string& name) {
        const fs::path dir_a = fresh_dir("acceptance_c10_" + name + "_a");
        const fs::path dir_b = fresh_dir("acceptance_c10_" + name + "_b");
        ExperimentReport rep_a = run_experiment(config_from(config_text, dir_a));
        ExperimentReport rep_b = run_experiment(config_from(config_text, dir_b));
        bool all = rep_a.output_files.size() == rep_b.output_files.size();
        for (std::size_t i = 0; all && i < rep_a.output_files.size(); ++i)
            all = read_file(rep_a.output_files[i]) == read_file(rep_b.output_files[i]);
        check(all, name + ": every CSV byte-identical across same-seed reruns");
        fs::remove_all(dir_a);
        fs::remove_all(dir_b);
    };
    run_twice(kLqTableConfig, "lq_table");
    run_twice(kTriadCase1Config, "triad_case");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <criterion 1..10>\n", argv[0]);
        return 2;
    }
    const int crit = std::atoi(argv[1]);
    std::printf("criterion %d:\n", crit);
    try {
        switch (crit) {
            case 1: criterion1(); break;
            case 2: criterion2(); break;
            case 3: criterion3(); break;
            case 4: criterion4(); break;
            case 5: criterion5(); break;
            case 6: criterion6(); break;
            case 7: criterion7(); break;
            case 8: criterion8(); break;
            case 9: criterion9(); break;
            case 10: criterion10(); break;
            default: std::fprintf(stderr, "unknown criterion %d\n", crit); return 2;
        }
    } catch (const std::exception& e) {
        std::printf("  [FAIL] unhandled exception: %s\n", e.what());
        ++g_failures;
    }
    std::printf("criterion %d: %s\n", crit, g_failures == 0 ? "PASS" : "FAIL");
    return g_failures == 0 ? 0 : 1;
}
