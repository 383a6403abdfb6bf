#include "gmr/sde_sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "gmr/errors.hpp"
#include "gmr/parallel.hpp"
#include "gmr/rng.hpp"

namespace gmr {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(long n, const std::function<void(long)>& fn) {
    const int workers = static_cast<int>(std::min<long>(max_threads(), n));
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(n);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

long SimConfig::n_steps() const {
    return static_cast<long>(std::llround(horizon_T / dt));
}

void SimConfig::validate() const {
    if (!(dt > 0.0) || !(horizon_T > 0.0) || dt > horizon_T) {
        throw ConfigError("SimConfig requires 0 < dt <= horizon_T");
    }
    if (n_paths < 1) throw ConfigError("SimConfig requires n_paths >= 1");
    const long n = n_steps();
    if (n < 1 || std::abs(n * dt - horizon_T) > 1e-9 * horizon_T) {
        throw ConfigError("SimConfig: horizon_T is not an integer multiple of dt");
    }
    if (initial_state.size() == 0) throw ConfigError("SimConfig: empty initial state");
}

namespace {

constexpr double kBlowUpNorm = 1e8;

/// Advances one path of one or two systems sharing a Brownian stream.
/// visit(step, state_a, state_b) is called after every step.
template <typename Visit>
void run_coupled_path(const SystemSpec& a, const SystemSpec* b, const SimConfig& cfg,
                      int path, Visit&& visit) {
    const long n = cfg.n_steps();
    const int m = a.brownian_dim;
    Eigen::VectorXd xa = a.x0, xb;
    if (b) xb = b->x0;
    Eigen::VectorXd dw(m);
    const double sqrt_dt = std::sqrt(cfg.dt);
    for (long s = 0; s < n; ++s) {
        for (int k = 0; k < m; ++k) {
            dw(k) = sqrt_dt * rng::gaussian(cfg.master_seed, path, s, k);
        }
        xa += a.drift(xa) * cfg.dt + a.diffusion(xa) * dw;
        if (!xa.allFinite() || xa.norm() > kBlowUpNorm) {
            throw SimulationError("path " + std::to_string(path) + " blew up", s);
        }
        if (b) {
            xb += b->drift(xb) * cfg.dt + b->diffusion(xb) * dw;
            if (!xb.allFinite() || xb.norm() > kBlowUpNorm) {
                throw SimulationError("coupled path " + std::to_string(path) + " blew up", s);
            }
        }
        visit(s, xa, xb, dw);
    }
}

PathEnsemble make_ensemble(const SimConfig& cfg, int dim, int brownian_dim) {
    PathEnsemble e;
    const long n = cfg.n_steps();
    e.times.resize(n + 1);
    for (long s = 0; s <= n; ++s) e.times[s] = s * cfg.dt;
    e.times.back() = cfg.horizon_T;
    e.n_paths = cfg.n_paths;
    e.dim = dim;
    e.brownian_dim = brownian_dim;
    e.master_seed = cfg.master_seed;
    e.states.resize(static_cast<long>(cfg.n_paths) * (n + 1) * dim);
    if (cfg.store_increments) {
        e.increments.resize(static_cast<long>(cfg.n_paths) * n * brownian_dim);
    }
    return e;
}

void store_state(PathEnsemble& e, int path, long step, const Eigen::VectorXd& x) {
    const long base = (static_cast<long>(path) * e.n_steps_p1() + step) * e.dim;
    for (int d = 0; d < e.dim; ++d) e.states[base + d] = x(d);
}

}  // namespace

PathEnsemble simulate(const DriftFn& drift, const DiffusionFn& diffusion,
                      const SimConfig& config, int brownian_dim) {
    config.validate();
    const int dim = static_cast<int>(config.initial_state.size());
    SystemSpec sys{drift, diffusion, dim, brownian_dim, config.initial_state, dim};
    PathEnsemble e = make_ensemble(config, dim, brownian_dim);
    const long n = config.n_steps();
    parallel_for(config.n_paths, [&](long p) {
        const int path = static_cast<int>(p);
        store_state(e, path, 0, config.initial_state);
        run_coupled_path(sys, nullptr, config, path,
                         [&](long s, const Eigen::VectorXd& x, const Eigen::VectorXd&,
                             const Eigen::VectorXd& dw) {
                             store_state(e, path, s + 1, x);
                             if (config.store_increments) {
                                 const long base =
                                     (p * n + s) * brownian_dim;
                                 for (int k = 0; k < brownian_dim; ++k) {
                                     e.increments[base + k] = dw(k);
                                 }
                             }
                         });
    });
    return e;
}

std::pair<PathEnsemble, PathEnsemble> simulate_coupled(const SystemSpec& full,
                                                       const SystemSpec& reduced,
                                                       const SimConfig& config) {
    config.validate();
    if (full.brownian_dim != reduced.brownian_dim) {
        throw ConfigError("simulate_coupled: Brownian driver dimensions differ");
    }
    if (full.slow_dim != reduced.slow_dim) {
        throw ConfigError("simulate_coupled: slow projections have unequal dimension");
    }
    PathEnsemble ef = make_ensemble(config, full.dim, full.brownian_dim);
    PathEnsemble er = make_ensemble(config, reduced.dim, reduced.brownian_dim);
    const long n = config.n_steps();
    parallel_for(config.n_paths, [&](long p) {
        const int path = static_cast<int>(p);
        store_state(ef, path, 0, full.x0);
        store_state(er, path, 0, reduced.x0);
        run_coupled_path(full, &reduced, config, path,
                         [&](long s, const Eigen::VectorXd& xa, const Eigen::VectorXd& xb,
                             const Eigen::VectorXd& dw) {
                             store_state(ef, path, s + 1, xa);
                             store_state(er, path, s + 1, xb);
                             if (config.store_increments) {
                                 const long base = (p * n + s) * full.brownian_dim;
                                 for (int k = 0; k < full.brownian_dim; ++k) {
                                     ef.increments[base + k] = dw(k);
                                     er.increments[base + k] = dw(k);
                                 }
                             }
                         });
    });
    return {std::move(ef), std::move(er)};
}

std::vector<double> coupled_sup_error_sq(const SystemSpec& full, const SystemSpec& reduced,
                                         const SimConfig& config) {
    config.validate();
    if (full.brownian_dim != reduced.brownian_dim) {
        throw ConfigError("coupled_sup_error_sq: Brownian driver dimensions differ");
    }
    if (full.slow_dim != reduced.slow_dim) {
        throw ConfigError("coupled_sup_error_sq: slow projections have unequal dimension");
    }
    std::vector<double> sup_sq(config.n_paths, 0.0);
    parallel_for(config.n_paths, [&](long p) {
        double sup = 0.0;
        run_coupled_path(full, &reduced, config, static_cast<int>(p),
                         [&](long, const Eigen::VectorXd& xa, const Eigen::VectorXd& xb,
                             const Eigen::VectorXd&) {
                             const double d2 =
                                 (xa.head(full.slow_dim) - xb.head(full.slow_dim)).squaredNorm();
                             if (d2 > sup) sup = d2;
                         });
        sup_sq[p] = sup;
    });
    return sup_sq;
}

StrongErrorReport strong_error_rate(const CoupledFamily& family,
                                    const std::vector<double>& eps_list,
                                    const SimConfig& base_config, const ThetaGrid& theta_grid) {
    if (eps_list.size() < 3) {
        throw ConfigError("strong_error_rate needs at least 3 epsilon values");
    }
    for (size_t i = 1; i < eps_list.size(); ++i) {
        if (!(eps_list[i] < eps_list[i - 1])) {
            throw ConfigError("strong_error_rate: eps_list must be strictly decreasing");
        }
    }
    if (eps_list.front() / eps_list.back() < 4.0) {
        throw ConfigError("strong_error_rate: eps_list must span at least a factor 4");
    }

    StrongErrorReport report;
    report.epsilons = eps_list;
    for (double eps : eps_list) {
        SimConfig cfg = base_config;
        if (family.dt_for_eps) {
            cfg.dt = family.dt_for_eps(eps);
            const long n = static_cast<long>(std::llround(cfg.horizon_T / cfg.dt));
            cfg.dt = cfg.horizon_T / static_cast<double>(std::max<long>(n, 1));
        }
        cfg.store_increments = false;
        const auto estimate = worst_case_expectation(
            [&](double theta) {
                auto [full, reduced] = family.make(eps, theta);
                SimConfig c = cfg;
                c.initial_state = full.x0;
                return coupled_sup_error_sq(full, reduced, c);
            },
            theta_grid);
        report.errors.push_back(std::sqrt(estimate.value));
    }

    // least-squares slope of log error vs log epsilon
    bool degenerate = true;
    for (double e : report.errors) degenerate = degenerate && e < 1e-14;
    if (degenerate) {
        report.fitted_slope = std::numeric_limits<double>::quiet_NaN();
        report.intercept = std::numeric_limits<double>::quiet_NaN();
        return report;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n = static_cast<double>(eps_list.size());
    for (size_t i = 0; i < eps_list.size(); ++i) {
        const double x = std::log(eps_list[i]);
        const double y = std::log(std::max(report.errors[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    report.fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report.intercept = (sy - report.fitted_slope * sx) / n;
    return report;
}

void PathEnsemble::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "path,step,t";
    for (int d = 0; d < dim; ++d) out << ",x" << d;
    out << "\n";
    char buf[32];
    for (int p = 0; p < n_paths; ++p) {
        for (long s = 0; s < n_steps_p1(); ++s) {
            out << p << "," << s;
            std::snprintf(buf, sizeof buf, "%.17g", times[s]);
            out << "," << buf;
            for (int d = 0; d < dim; ++d) {
                std::snprintf(buf, sizeof buf, "%.17g", state(p, s, d));
                out << "," << buf;
            }
            out << "\n";
        }
    }
}

void StrongErrorReport::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << "epsilon,error,slope_overall\n";
    char buf[96];
    for (size_t i = 0; i < epsilons.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", epsilons[i], errors[i], fitted_slope);
        out << buf << "\n";
    }
}

}  // namespace gmr
