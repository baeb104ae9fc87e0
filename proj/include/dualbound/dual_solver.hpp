#pragma once

#include "dualbound/market_model.hpp"
#include "dualbound/preferences.hpp"

namespace dualbound {

// ============================================================================
// Closed-form dual side. Conditional on time-t information the log kernel
// over [t, T] is Gaussian; everything here is lognormal algebra on top of
// that, plus a one-dimensional fixed point for the shadow price of the
// non-traded shock.
// ============================================================================

// Conditional moments of log M over [t, T] given r_t, under shadow price
// lambda_u_hat. mu_d / mu_u are the branch-shifted means m + (1 - 1/gamma_i)
// sigma_M^2; b_factor is the rate duration over the window.
struct KernelMoments {
    double mu_d = 0.0;
    double mu_u = 0.0;
    double sigma_M = 0.0; // standard deviation of log M over [t, T]
    double b_factor = 0.0;
};

KernelMoments kernel_moments(double t, double T, double r_t,
                             const MarketParams& params, const Preferences& prefs,
                             double lambda_u_hat);

// Branch-free mean m of log M over [t, T]: mu_i minus the branch shift.
inline double kernel_mean(const KernelMoments& km, const Preferences& prefs) {
    double b_d = 1.0 - 1.0 / prefs.gamma_d;
    return km.mu_d - b_d * km.sigma_M * km.sigma_M;
}

// Candidate controls for either side of the bound.
struct Controls {
    enum class Side { dual, primal };
    double eta = 1.0;          // budget multiplier, > 0
    double lambda_u_hat = 0.0; // shadow price of the non-traded shock
    Side side = Side::dual;
};

// Branch wealth term X^{gamma} = eta^{-1/gamma} exp(b m + b^2 sigma^2 / 2),
// b = 1 - 1/gamma. Kink scaling is applied by callers.
double x_gamma(double gamma, double eta, double m, double sigma2);

// Per-state dual quantities shared by the budget equation, market value of
// wealth, and the portfolio blend. All terms carry the kink scaling.
struct BranchState {
    double x_d = 0.0;   // down-branch wealth term
    double x_u = 0.0;   // up-branch wealth term
    double n_d = 0.0;   // N(d_d)
    double n_u = 0.0;   // N(-d_u)
    double value = 0.0; // x_d n_d + x_u n_u, undeflated market value
    double blend = 0.0; // w = (x_d n_d / gamma_d + x_u n_u / gamma_u) / value
};

// log_kernel is log M_t for the state being valued (0 at time 0); moments
// taken over [t, T].
BranchState branch_state(double log_eta, double log_kernel, const KernelMoments& km,
                         const Preferences& prefs);

// Solves the time-0 budget equation for eta and the shadow-price fixed point
// for lambda_u_hat. Throws NoConvergence if residuals exceed 1e-10 after the
// iteration caps, BracketError if the budget cannot be bracketed.
Controls solve_dual(const MarketParams& params, const Preferences& prefs,
                    double x0, double T);

// Dual objective at the given controls: E[V(eta Z_T, Pi_T)] + eta x0 in
// closed form. At the solve_dual controls this is the upper bound.
double upper_bound(const Controls& controls, const MarketParams& params,
                   const Preferences& prefs, double x0, double T);

} // namespace dualbound
