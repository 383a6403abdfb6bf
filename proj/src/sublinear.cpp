#include "gmr/sublinear.hpp"

#include <cmath>
#include <limits>

#include "gmr/errors.hpp"

namespace gmr {

UncertaintyInterval::UncertaintyInterval(double lo, double hi)
    : sigma_lo(lo), sigma_hi(hi) {
    if (!(lo > 0.0) || !(hi >= lo)) {
        throw ConfigError("UncertaintyInterval requires 0 < sigma_lo <= sigma_hi, got [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

ThetaGrid ThetaGrid::uniform(const UncertaintyInterval& interval, int n_points) {
    if (n_points < 1) throw ConfigError("ThetaGrid needs at least one point");
    if (n_points == 1 && !interval.degenerate()) {
        throw ConfigError("a single-point ThetaGrid requires a degenerate interval");
    }
    ThetaGrid g{interval, n_points, {}};
    g.values.reserve(n_points);
    if (n_points == 1) {
        g.values.push_back(interval.sigma_lo);
        return g;
    }
    const double h = (interval.sigma_hi - interval.sigma_lo) / (n_points - 1);
    for (int i = 0; i < n_points; ++i) g.values.push_back(interval.sigma_lo + i * h);
    g.values.front() = interval.sigma_lo;
    g.values.back() = interval.sigma_hi;
    return g;
}

ThetaGrid ThetaGrid::singleton(double theta) {
    return uniform(UncertaintyInterval(theta, theta), 1);
}

double g_nonlinearity(double x, const UncertaintyInterval& theta) {
    return 0.5 * x * (x >= 0.0 ? theta.sigma_hi : theta.sigma_lo);
}

double g_argmax(double x, const UncertaintyInterval& theta) {
    return x >= 0.0 ? theta.sigma_hi : theta.sigma_lo;
}

double g_term(double bracket, const UncertaintyInterval& theta, bool squared) {
    const double s = g_argmax(bracket, theta);
    return 0.5 * bracket * (squared ? s * s : s);
}

WorstCaseEstimate worst_case_expectation(const EnsembleFactory& ensemble_factory,
                                         const ThetaGrid& grid) {
    if (grid.values.empty()) throw ConfigError("worst_case_expectation: empty theta grid");

    WorstCaseEstimate est;
    est.value = -std::numeric_limits<double>::infinity();
    est.argmax_theta = grid.values.front();
    est.n_samples = 0;

    for (double theta : grid.values) {
        const std::vector<double> samples = ensemble_factory(theta);
        const auto n = static_cast<int>(samples.size());
        if (n < 2) {
            throw ConfigError("worst_case_expectation: ensemble at theta=" +
                              std::to_string(theta) + " has fewer than 2 samples");
        }
        if (est.n_samples == 0) {
            est.n_samples = n;
        } else if (n != est.n_samples) {
            throw ConfigError("worst_case_expectation: unequal sample counts across theta");
        }
        double mean = 0.0;
        for (double s : samples) mean += s;
        mean /= n;
        double var = 0.0;
        for (double s : samples) var += (s - mean) * (s - mean);
        var /= (n - 1);
        est.per_theta_means.push_back({theta, mean, std::sqrt(var / n)});
        if (mean > est.value) {  // strict: ties stay at the smallest theta
            est.value = mean;
            est.argmax_theta = theta;
        }
    }
    return est;
}

}  // namespace gmr
