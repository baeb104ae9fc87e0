#pragma once

#include <cstdint>
#include <vector>

#include "dualbound/mathx.hpp"

namespace dualbound {

// ============================================================================
// Market primitives: two-factor term structure (short rate r, expected
// inflation pi), a price index driven by a non-traded shock, a stock and two
// nominal bonds, and the pricing kernel used for valuation.
// ============================================================================

struct MarketParams {
    double sigma_s = 0.158;

    // Quoted prices of risk. Kept for interface and reporting; pricing and
    // portfolio math derive the premia from (rho, xi, phi) below so that the
    // kernel and the traded assets stay arbitrage-consistent.
    double lambda_s = 0.343;
    double lambda_r = -0.209;
    double lambda_pi = -0.105;
    double lambda_u = 0.027;

    double rho_sr = -0.129;
    double rho_spi = -0.024;
    double rho_rpi = -0.061;

    Vec3 phi = {-0.333, 0.170, 0.120}; // kernel loadings on traded shocks
    double phi_u = -0.014;             // kernel loading on the non-traded shock
    Vec3 xi = {0.0, 0.0, 0.0};         // price-index loadings on traded shocks
    double xi_u = 0.013;               // price-index loading on the non-traded shock

    double r_bar = 0.012;
    double kappa = 0.613;
    double sigma_r = 0.026;
    double pi_bar = 0.054;
    double alpha = 0.027;
    double sigma_pi = 0.014;

    double r0 = 0.029;
    double pi0 = 0.054;

    // Nominal bond maturities; must exceed the investment horizon.
    double bond_maturity_1 = 10.0;
    double bond_maturity_2 = 20.0;

    Mat3 correlation() const {
        return {{{1.0, rho_sr, rho_spi},
                 {rho_sr, 1.0, rho_rpi},
                 {rho_spi, rho_rpi, 1.0}}};
    }

    // Premia implied by no-arbitrage between the kernel and the traded
    // assets: lambda = rho (xi - phi), lambda_u = xi_u - phi_u.
    Vec3 risk_premia() const {
        Vec3 diff = {xi[0] - phi[0], xi[1] - phi[1], xi[2] - phi[2]};
        return mat_vec(correlation(), diff);
    }
    double risk_premium_u() const { return xi_u - phi_u; }

    // throws ConfigError / NotPositiveSemiDefinite on bad inputs
    void validate(double horizon) const;
};

struct SimConfig {
    int n_paths = 10000;
    double dt = 0.05;
    double horizon = 5.0;
    std::uint64_t seed = 20260830ULL;
    double x0 = 1.0;
};

// One Monte Carlo panel of market states. Path-major layout: state arrays
// hold n_paths blocks of (n_steps+1) values, increments hold n_paths blocks
// of n_steps*4 values ordered (stock, rate, inflation, non-traded).
struct PathSet {
    int n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    double lambda_u_eff = 0.0; // shadow price the kernel was simulated under

    std::vector<double> grid; // n_steps + 1 times

    std::vector<double> r;
    std::vector<double> pi;
    std::vector<double> log_price_index;
    std::vector<double> log_kernel;
    std::vector<double> log_money_market; // left-point accumulated integral of R_f

    std::vector<double> dz; // n_paths * n_steps * 4

    std::size_t idx(int path, int step) const {
        return static_cast<std::size_t>(path) * (n_steps + 1) + step;
    }
    std::size_t dz_idx(int path, int step, int shock) const {
        return (static_cast<std::size_t>(path) * n_steps + step) * 4 + shock;
    }
};

// Lower Cholesky factor of the traded-shock correlation matrix.
Mat3 correlation_factor(const MarketParams& params);

// Nominal short rate R_f = r + pi - xi' lambda - xi_u lambda_u_eff.
double nominal_rate(double r, double pi, const MarketParams& params, double lambda_u_eff);

// Interest-rate exposure of a zero-coupon claim over [t, maturity]:
// (sigma_r / kappa) (1 - exp(-kappa (maturity - t))).
double rate_duration(double t, double maturity, const MarketParams& params);

// Diffusion loadings of the traded assets, rows (stock, bond 1, bond 2)
// against shocks (z_s, z_r, z_pi). Throws SingularSigma when degenerate.
Mat3 sigma_matrix(double t, const MarketParams& params);

// Euler simulation of (r, pi, log Pi, log M, integral of R_f) on the grid.
// The kernel carries loading xi_u - lambda_u_eff on the non-traded shock.
// Bitwise deterministic for a fixed seed regardless of thread count.
PathSet simulate_states(const MarketParams& params, const SimConfig& config, double lambda_u_eff);

} // namespace dualbound
