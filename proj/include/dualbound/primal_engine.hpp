#pragma once

#include "dualbound/dual_solver.hpp"
#include "dualbound/market_model.hpp"
#include "dualbound/preferences.hpp"

namespace dualbound {

// ============================================================================
// Primal side: turn candidate controls into an admissible trading strategy,
// roll wealth along simulated paths, and estimate the expected-utility lower
// bound by Monte Carlo.
// ============================================================================

// Market state of one path at one grid time.
struct StateSlice {
    double r = 0.0;
    double log_kernel = 0.0;
    double log_price_index = 0.0;
};

struct WealthSample {
    std::vector<double> terminal_wealth;      // nominal X_T per path
    std::vector<double> terminal_price_index; // Pi_T per path
    // optional n_paths * n_steps * 3 risky weights (stock, bond 1, bond 2)
    std::vector<double> weight_paths;
    // optional n_paths * (n_steps + 1) wealth levels on the grid
    std::vector<double> wealth_paths;
    int n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    double x0 = 1.0;
    double horizon = 0.0;
};

struct LowerBoundEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0; // value - 1.96 std_error
    double ci_hi = 0.0;
};

// Risky-asset weights (stock, bond 1, bond 2) for the projected strategy:
// exposure x_bar = (lambda - A) w + A with A the horizon hedge, mapped
// through the inverse transposed sigma matrix. The fictitious asset gets
// exactly zero weight by construction.
Vec3 portfolio_weights(double t, double T, const StateSlice& state,
                       const Controls& controls, const MarketParams& params,
                       const Preferences& prefs);

// Market value of the dual-optimal claim at (t, state), deflated to nominal
// wealth units. Equals x0 at t = 0 on the solve_dual controls.
double market_value_wealth(double t, double T, const StateSlice& state,
                           const Controls& controls, const MarketParams& params,
                           const Preferences& prefs);

struct WealthOptions {
    bool record_trajectories = false; // keep per-step weights and wealth levels
    bool zero_allocation = false;     // park everything in the money market
};

// Log-wealth Euler recursion along the given paths under the projected
// strategy. The money-market leg uses the rate the paths were simulated
// under; the weights use the candidate controls.
WealthSample simulate_wealth(const PathSet& paths, const Controls& controls,
                             const MarketParams& params, const Preferences& prefs,
                             double x0, WealthOptions options = {});

// Sample mean of terminal utility with standard error and 95 percent CI.
LowerBoundEstimate lower_bound(const WealthSample& sample, const Preferences& prefs);

struct OptimizeResult {
    Controls controls;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

// Nelder-Mead over (lambda_u_hat, eta) maximizing the Monte Carlo lower
// bound on a path set pinned at the initial controls (common random
// numbers; candidate controls enter through the weights only). The search
// refines locally: it is confined to a small trust region around the start,
// and the result never falls below the initial objective.
OptimizeResult optimize_primal(const MarketParams& params, const Preferences& prefs,
                               const SimConfig& config, const Controls& init);

// Same, reusing an already simulated path set (must match init's shadow price).
OptimizeResult optimize_primal(const PathSet& paths, const MarketParams& params,
                               const Preferences& prefs, const SimConfig& config,
                               const Controls& init);

} // namespace dualbound
