#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmr/errors.hpp"
#include "gmr/rng.hpp"
#include "gmr/sde_sim.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace gmr;

namespace {

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

}  // namespace

TEST_CASE("counter hash regression vectors") {
    CHECK(rng::counter_hash(0, 0, 0, 0) == 2391539541053276776ull);
    CHECK(rng::counter_hash(42, 3, 7, 1) == 5136418976269589612ull);
    CHECK(rng::counter_hash(~0ull, 5, 9, 2) == 2628918308565526439ull);
}

TEST_CASE("uniform regression and range") {
    CHECK(rng::uniform01(42, 3, 7, 1) == doctest::Approx(0.27844583064336303).epsilon(1e-15));
    for (int k = 0; k < 2000; ++k) {
        const double u = rng::uniform01(7, 0, 0, static_cast<std::uint64_t>(k));
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("gaussian regression and moments") {
    CHECK(rng::gaussian(42, 3, 7, 1) == doctest::Approx(1.2106255650348114).epsilon(1e-15));
    CHECK(rng::gaussian(1, 0, 0, 0) == doctest::Approx(0.0044415591357176874).epsilon(1e-12));
    // Same counters, same value: pure function of the key.
    CHECK(rng::gaussian(9, 2, 4, 6) == rng::gaussian(9, 2, 4, 6));

    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double g = rng::gaussian(123, 0, 0, static_cast<std::uint64_t>(k));
        sum += g;
        sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("SimConfig validation") {
    SimConfig c{0.1, 1.0, 4, 1, vec1(0.0)};
    CHECK_NOTHROW(c.validate());
    CHECK(c.n_steps() == 10);

    SimConfig bad = c;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dt = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.n_paths = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dt = 0.3;  // 1.0 / 0.3 is not an integer
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.initial_state = VectorXd();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("simulate: zero dynamics keeps the path constant") {
    SimConfig c{0.05, 1.0, 3, 11, vec1(2.5)};
    auto ens = simulate([](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                        [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, c, 1);
    CHECK(ens.n_paths == 3);
    CHECK(ens.dim == 1);
    CHECK(ens.times.size() == 21);
    CHECK(ens.times.front() == doctest::Approx(0.0));
    CHECK(ens.times.back() == doctest::Approx(1.0));
    for (int p = 0; p < 3; ++p)
        for (long s = 0; s <= 20; ++s) CHECK(ens.state(p, s, 0) == doctest::Approx(2.5));
}

TEST_CASE("simulate: deterministic linear ODE matches exp(-t)") {
    SimConfig c{1e-4, 1.0, 1, 3, vec1(1.0)};
    auto ens = simulate([](const VectorXd& x) { return VectorXd(-x); },
                        [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, c, 1);
    CHECK(ens.state(0, ens.n_steps_p1() - 1, 0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("simulate: pure diffusion has variance sigma^2 T") {
    const double sigma = 0.7, T = 1.0;
    SimConfig c{0.01, T, 4000, 77, vec1(0.0)};
    c.store_increments = false;
    auto ens = simulate([](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                        [sigma](const VectorXd&) {
                            MatrixXd m(1, 1);
                            m << sigma;
                            return m;
                        },
                        c, 1);
    double sum = 0.0, sum2 = 0.0;
    const long last = ens.n_steps_p1() - 1;
    for (int p = 0; p < c.n_paths; ++p) {
        const double x = ens.state(p, last, 0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / c.n_paths;
    const double var = sum2 / c.n_paths - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(sigma * sigma * T).epsilon(0.1));
    CHECK(ens.increments.empty());
}

TEST_CASE("simulate: explosive drift raises SimulationError") {
    SimConfig c{0.1, 10.0, 1, 5, vec1(1.0)};
    CHECK_THROWS_AS(simulate([](const VectorXd& x) { return VectorXd(100.0 * x); },
                             [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, c, 1),
                    SimulationError);
}

TEST_CASE("simulate: increments reproduce the counter RNG stream") {
    SimConfig c{0.25, 1.0, 2, 42, vec1(0.0)};
    auto ens = simulate([](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                        [](const VectorXd&) { return MatrixXd::Identity(1, 1); }, c, 1);
    const double sdt = std::sqrt(0.25);
    for (int p = 0; p < 2; ++p)
        for (long s = 0; s < 4; ++s)
            CHECK(ens.increment(p, s, 0) ==
                  doctest::Approx(sdt * rng::gaussian(42, static_cast<std::uint64_t>(p),
                                                      static_cast<std::uint64_t>(s), 0))
                      .epsilon(1e-15));
}

TEST_CASE("simulate_coupled: both systems see identical increments") {
    SystemSpec a{[](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                 [](const VectorXd&) { return MatrixXd::Identity(1, 1); }, 1, 1, vec1(0.0), 1};
    SystemSpec b = a;
    b.x0 = vec1(3.0);

    SimConfig c{0.1, 1.0, 3, 99, vec1(0.0)};
    auto [ea, eb] = simulate_coupled(a, b, c);
    for (int p = 0; p < 3; ++p)
        for (long s = 0; s < 10; ++s)
            CHECK(ea.increment(p, s, 0) == eb.increment(p, s, 0));
    // Same noise, same dynamics, shifted start: trajectories differ by the offset.
    for (int p = 0; p < 3; ++p)
        for (long s = 0; s <= 10; ++s)
            CHECK(eb.state(p, s, 0) - ea.state(p, s, 0) == doctest::Approx(3.0).epsilon(1e-12));

    SystemSpec mismatched = b;
    mismatched.brownian_dim = 2;
    mismatched.diffusion = [](const VectorXd&) { return MatrixXd::Zero(1, 2); };
    CHECK_THROWS_AS(simulate_coupled(a, mismatched, c), ConfigError);
}

TEST_CASE("coupled_sup_error_sq agrees with stored trajectories") {
    SystemSpec full{[](const VectorXd& x) { return VectorXd(-2.0 * x); },
                    [](const VectorXd&) {
                        MatrixXd m(1, 1);
                        m << 0.5;
                        return m;
                    },
                    1, 1, vec1(1.0), 1};
    SystemSpec red{[](const VectorXd& x) { return VectorXd(-x); },
                   [](const VectorXd&) {
                       MatrixXd m(1, 1);
                       m << 0.5;
                       return m;
                   },
                   1, 1, vec1(1.0), 1};

    SimConfig c{0.05, 1.0, 8, 7, vec1(1.0)};
    auto errs = coupled_sup_error_sq(full, red, c);
    auto [ef, er] = simulate_coupled(full, red, c);
    REQUIRE(errs.size() == 8);
    for (int p = 0; p < 8; ++p) {
        double sup = 0.0;
        for (long s = 0; s <= 20; ++s) {
            const double d = ef.state(p, s, 0) - er.state(p, s, 0);
            sup = std::max(sup, d * d);
        }
        CHECK(errs[static_cast<std::size_t>(p)] == doctest::Approx(sup).epsilon(1e-12));
    }
}

TEST_CASE("strong_error_rate input validation") {
    CoupledFamily fam{[](double, double) {
                          SystemSpec s{[](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                                       [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, 1, 1,
                                       vec1(0.0), 1};
                          return std::make_pair(s, s);
                      },
                      [](double) { return 0.1; }};
    SimConfig base{0.1, 1.0, 4, 1, vec1(0.0)};
    ThetaGrid grid = ThetaGrid::uniform(UncertaintyInterval{0.5, 1.0}, 2);

    CHECK_THROWS_AS(strong_error_rate(fam, {0.4, 0.1}, base, grid), ConfigError);
    CHECK_THROWS_AS(strong_error_rate(fam, {0.1, 0.2, 0.4}, base, grid), ConfigError);
    CHECK_THROWS_AS(strong_error_rate(fam, {0.4, 0.2, 0.15}, base, grid), ConfigError);
}

TEST_CASE("strong_error_rate recovers an exact first-order family") {
    // full = reduced + eps * t deterministically, so sup error = eps * T exactly
    // and the fitted log-log slope is 1.
    CoupledFamily fam{[](double eps, double /*theta*/) {
                          SystemSpec full{[eps](const VectorXd& x) { return vec1(-x(0) + eps); },
                                          [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, 1,
                                          1, vec1(0.0), 1};
                          SystemSpec red{[](const VectorXd& x) { return VectorXd(-x); },
                                         [](const VectorXd&) { return MatrixXd::Zero(1, 1); }, 1,
                                         1, vec1(0.0), 1};
                          return std::make_pair(full, red);
                      },
                      [](double) { return 0.01; }};
    SimConfig base{0.01, 1.0, 2, 13, vec1(0.0)};
    ThetaGrid grid = ThetaGrid::uniform(UncertaintyInterval{0.5, 1.0}, 2);

    auto report = strong_error_rate(fam, {0.4, 0.2, 0.1, 0.05}, base, grid);
    REQUIRE(report.errors.size() == 4);
    CHECK(report.fitted_slope == doctest::Approx(1.0).epsilon(0.02));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(report.errors[i] / report.epsilons[i] ==
              doctest::Approx(report.errors[0] / report.epsilons[0]).epsilon(0.02));

    const std::string path = "strong_rate_test_tmp.csv";
    report.write_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epsilon,error,slope_overall");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
    std::remove(path.c_str());
}

TEST_CASE("PathEnsemble::write_csv format and determinism") {
    SimConfig c{0.5, 1.0, 2, 21, vec1(1.0)};
    auto ens = simulate([](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                        [](const VectorXd&) { return MatrixXd::Identity(1, 1); }, c, 1);
    const std::string path = "ensemble_test_tmp.csv";
    ens.write_csv(path);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string first = buf.str();
    CHECK(first.rfind("path,step,t,x0\n", 0) == 0);

    auto ens2 = simulate([](const VectorXd& x) { return VectorXd::Zero(x.size()); },
                         [](const VectorXd&) { return MatrixXd::Identity(1, 1); }, c, 1);
    ens2.write_csv(path);
    std::ifstream in2(path);
    std::stringstream buf2;
    buf2 << in2.rdbuf();
    CHECK(buf2.str() == first);
    std::remove(path.c_str());
}
