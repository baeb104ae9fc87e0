#pragma once

#include <utility>
#include <vector>

#include "dualbound/dual_solver.hpp"
#include "dualbound/primal_engine.hpp"

namespace dualbound {

// Evaluation layer: gap, welfare cost, densities, and the reduced-economy
// allocation curve.

struct BoundsReport {
    double lower = 0.0;
    double upper = 0.0;
    double gap = 0.0;
    double cv = 0.0;    // compensating variation in wealth units
    double al_bp = 0.0; // annualized welfare loss, basis points
    LowerBoundEstimate lower_estimate;
    Controls controls_primal;
    Controls controls_dual;
};

inline double duality_gap(double upper, double lower) { return upper - lower; }

// Extra initial wealth cv >= 0 that lifts the simulated lower bound to the
// upper bound: mean U((1 + cv/x0) X_T, Pi_T) = j_upper, solved by bisection
// on [0, x0] over the frozen sample (the strategy scales linearly in initial
// wealth). Returns 0 when the gap is already closed; throws BracketError if
// doubling initial wealth is not enough.
double compensating_variation(const WealthSample& sample, const Preferences& prefs,
                              double j_upper, double x0);

// ((1 + cv/x0)^(1/T) - 1) * 1e4, the annualized fee in basis points.
double annual_loss(double cv, double x0, double T);

struct DensityEstimate {
    std::vector<double> x;
    std::vector<double> density;
};

// Gaussian kernel density on a 512-point grid spanning the sample range
// plus three bandwidths each side. Throws DomainError on empty samples or
// non-positive bandwidth.
DensityEstimate kde(const std::vector<double>& samples, double bandwidth);

// Optimal stock weight as a function of wealth in the reduced one-asset
// economy (premium lambda, volatility sigma, zero rates, unit price index).
// Weights lie in [lambda/(gamma_d sigma), lambda/(gamma_u sigma)] and are
// nondecreasing in wealth when gamma_d >= gamma_u.
std::vector<std::pair<double, double>> allocation_curve(
    const Preferences& prefs, double lambda, double sigma, double T,
    const std::vector<double>& wealth_grid);

} // namespace dualbound
