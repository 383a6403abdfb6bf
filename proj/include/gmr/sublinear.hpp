#pragma once

#include <functional>
#include <vector>

namespace gmr {

/// Interval [sigma_lo, sigma_hi] of admissible diffusion parameters.
/// All worst-case (sublinear) expectations in this library maximise over it.
struct UncertaintyInterval {
    double sigma_lo;
    double sigma_hi;

    UncertaintyInterval(double lo, double hi);

    bool degenerate() const { return sigma_lo == sigma_hi; }
    double midpoint() const { return 0.5 * (sigma_lo + sigma_hi); }
};

/// Uniform discretisation of an UncertaintyInterval, endpoints included.
struct ThetaGrid {
    UncertaintyInterval interval;
    int n_points;
    std::vector<double> values;

    static ThetaGrid uniform(const UncertaintyInterval& interval, int n_points);
    static ThetaGrid singleton(double theta);
};

struct PerThetaStat {
    double theta;
    double mean;
    double mc_std_error;  // sample std / sqrt(n)
};

/// Result of a discretised sublinear expectation: max over per-theta MC means.
struct WorstCaseEstimate {
    double value;
    double argmax_theta;  // ties resolved to the smallest theta
    std::vector<PerThetaStat> per_theta_means;
    int n_samples;  // per theta
};

/// G(x) = max over sigma in [lo, hi] of sigma * x / 2.
double g_nonlinearity(double x, const UncertaintyInterval& theta);

/// Endpoint attaining the max in G: sigma_hi if x >= 0, sigma_lo otherwise.
double g_argmax(double x, const UncertaintyInterval& theta);

/// One-parameter G-term with the multiplier applied to the selected endpoint.
/// `squared` covers brackets whose parameter enters quadratically (the triad
/// limit), where the selected endpoint multiplies as its square.
double g_term(double bracket, const UncertaintyInterval& theta, bool squared);

/// Sample ensemble of a scalar path functional for a given theta. Must return
/// the same number (>= 2) of i.i.d. samples for every theta.
using EnsembleFactory = std::function<std::vector<double>(double theta)>;

WorstCaseEstimate worst_case_expectation(const EnsembleFactory& ensemble_factory,
                                         const ThetaGrid& grid);

}  // namespace gmr
