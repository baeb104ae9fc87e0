#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualbound/errors.hpp"
#include "dualbound/market_model.hpp"

using namespace dualbound;

namespace {

double max_abs_diff(const Mat3& a, const Mat3& b) {
    double m = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m = std::max(m, std::fabs(a[i][j] - b[i][j]));
    return m;
}

Mat3 mul_lltr(const Mat3& l) {
    Mat3 p = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) p[i][j] += l[i][k] * l[j][k];
    return p;
}

} // namespace

TEST_CASE("correlation factor reproduces identity") {
    MarketParams params;
    params.rho_sr = params.rho_spi = params.rho_rpi = 0.0;
    Mat3 l = correlation_factor(params);
    Mat3 eye = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    CHECK(max_abs_diff(l, eye) == 0.0);
}

TEST_CASE("correlation factor reconstructs the benchmark matrix") {
    MarketParams params;
    Mat3 l = correlation_factor(params);
    CHECK(max_abs_diff(mul_lltr(l), params.correlation()) < 1e-12);

    // frozen factor entries
    CHECK(l[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l[1][0] == doctest::Approx(-0.129).epsilon(1e-12));
    CHECK(l[1][1] == doctest::Approx(0.991644593592).epsilon(1e-10));
    CHECK(l[2][0] == doctest::Approx(-0.024).epsilon(1e-12));
    CHECK(l[2][1] == doctest::Approx(-0.064636060555).epsilon(1e-10));
    CHECK(l[2][2] == doctest::Approx(0.997620258253).epsilon(1e-10));
}

TEST_CASE("invalid correlation is rejected") {
    MarketParams params;
    params.rho_sr = 1.5;
    CHECK_THROWS_AS(correlation_factor(params), NotPositiveSemiDefinite);
}

TEST_CASE("nominal rate arithmetic") {
    MarketParams params;

    params.xi_u = 0.0;
    CHECK(nominal_rate(0.012, 0.054, params, 123.0) == doctest::Approx(0.066).epsilon(1e-14));

    params.xi_u = 0.013;
    CHECK(nominal_rate(0.012, 0.054, params, 0.027) ==
          doctest::Approx(0.065649).epsilon(1e-12));

    params.xi = {0.0, 0.0, 0.0};
    params.xi_u = 0.0;
    CHECK(nominal_rate(0.0, 0.0, params, 0.5) == 0.0);
}

TEST_CASE("deterministic rate path matches the mean-reversion oracle") {
    MarketParams params;
    params.sigma_r = 0.0;
    params.sigma_pi = 0.0;
    params.phi = {0.0, 0.0, 0.0};
    params.phi_u = 0.0;
    params.xi_u = 0.0;

    SimConfig coarse;
    coarse.n_paths = 2;
    coarse.dt = 0.05;
    coarse.horizon = 5.0;
    SimConfig fine = coarse;
    fine.dt = 0.001;

    PathSet pa = simulate_states(params, coarse, 0.0);
    PathSet pb = simulate_states(params, fine, 0.0);
    double r_coarse = pa.r[pa.idx(0, pa.n_steps)];
    double r_fine = pb.r[pb.idx(0, pb.n_steps)];
    double exact = params.r_bar + (params.r0 - params.r_bar) * std::exp(-params.kappa * 5.0);

    CHECK(std::fabs(r_coarse - r_fine) < 1e-3);
    CHECK(std::fabs(r_fine - exact) < 1e-4);
}

TEST_CASE("same seed gives bitwise identical paths") {
    MarketParams params;
    SimConfig config;
    config.n_paths = 64;
    config.horizon = 1.0;
    PathSet a = simulate_states(params, config, 0.02);
    PathSet b = simulate_states(params, config, 0.02);
    CHECK(a.r == b.r);
    CHECK(a.pi == b.pi);
    CHECK(a.log_price_index == b.log_price_index);
    CHECK(a.log_kernel == b.log_kernel);
    CHECK(a.log_money_market == b.log_money_market);
    CHECK(a.dz == b.dz);
}

TEST_CASE("non integral horizon over dt is rejected") {
    MarketParams params;
    SimConfig config;
    config.dt = 0.3;
    config.horizon = 1.0;
    CHECK_THROWS_AS(simulate_states(params, config, 0.0), ConfigError);
}

TEST_CASE("terminal rate and inflation means match the OU oracle") {
    MarketParams params;
    SimConfig config; // N=10000, dt=0.05, T=5
    PathSet paths = simulate_states(params, config, params.risk_premium_u());

    double mean_r = 0.0, mean_pi = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) {
        mean_r += paths.r[paths.idx(p, paths.n_steps)];
        mean_pi += paths.pi[paths.idx(p, paths.n_steps)];
    }
    mean_r /= paths.n_paths;
    mean_pi /= paths.n_paths;

    double ss_r = 0.0, ss_pi = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) {
        double dr = paths.r[paths.idx(p, paths.n_steps)] - mean_r;
        double dp = paths.pi[paths.idx(p, paths.n_steps)] - mean_pi;
        ss_r += dr * dr;
        ss_pi += dp * dp;
    }
    double se_r = std::sqrt(ss_r / (paths.n_paths - 1.0) / paths.n_paths);
    double se_pi = std::sqrt(ss_pi / (paths.n_paths - 1.0) / paths.n_paths);

    double oracle_r = params.r_bar + (params.r0 - params.r_bar) * std::exp(-params.kappa * 5.0);
    double oracle_pi = params.pi_bar + (params.pi0 - params.pi_bar) * std::exp(-params.alpha * 5.0);
    CHECK(std::fabs(mean_r - oracle_r) < 3.0 * se_r);
    CHECK(std::fabs(mean_pi - oracle_pi) < 3.0 * se_pi);
}

TEST_CASE("increment columns reproduce the driver correlations") {
    MarketParams params;
    SimConfig config;
    config.n_paths = 20000;
    config.horizon = 0.05; // single step
    PathSet paths = simulate_states(params, config, 0.0);

    double c[4][4] = {};
    for (int p = 0; p < paths.n_paths; ++p)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                c[i][j] += paths.dz[paths.dz_idx(p, 0, i)] * paths.dz[paths.dz_idx(p, 0, j)];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) c[i][j] /= paths.n_paths;

    Mat3 rho = params.correlation();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::fabs(c[i][j] / std::sqrt(c[i][i] * c[j][j]) - rho[i][j]) < 0.03);
    for (int i = 0; i < 3; ++i)
        CHECK(std::fabs(c[i][3] / std::sqrt(c[i][i] * c[3][3])) < 0.03);
}

TEST_CASE("sigma matrix loadings") {
    MarketParams params; // maturities 10 and 20
    Mat3 sigma = sigma_matrix(0.0, params);

    CHECK(sigma[0][0] == doctest::Approx(0.158).epsilon(1e-14));
    CHECK(sigma[0][1] == 0.0);
    CHECK(sigma[0][2] == 0.0);
    CHECK(sigma[1][0] == 0.0);

    // spec arithmetic for the 10y bond rate loading, plus frozen exact values
    CHECK(std::fabs(sigma[1][1] - (-0.042317)) < 1e-5);
    CHECK(sigma[1][1] == doctest::Approx(-0.042322037349).epsilon(1e-9));
    CHECK(sigma[1][2] == doctest::Approx(-0.122692114048).epsilon(1e-9));
    CHECK(sigma[2][1] == doctest::Approx(-0.042414154690).epsilon(1e-9));
    CHECK(sigma[2][2] == doctest::Approx(-0.216352758028).epsilon(1e-9));
}

TEST_CASE("degenerate sigma matrix cases raise") {
    MarketParams params;
    CHECK_THROWS_AS(sigma_matrix(10.0, params), SingularSigma); // t equals maturity 1

    MarketParams flat;
    flat.sigma_pi = 0.0;
    Mat3 sigma = sigma_matrix(0.0, flat);
    CHECK(sigma[1][2] == 0.0);
    CHECK(sigma[2][2] == 0.0);
    Vec3 rhs = {1.0, 1.0, 1.0};
    Mat3 sigma_t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sigma_t[i][j] = sigma[j][i];
    CHECK_THROWS_AS(solve3(sigma_t, rhs), SingularSigma);
}

TEST_CASE("deflated money market account has unit mean") {
    MarketParams params;
    SimConfig config; // N=10000, T=5
    PathSet paths = simulate_states(params, config, params.lambda_u);

    std::vector<double> z(paths.n_paths);
    double mean = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) {
        std::size_t idx = paths.idx(p, paths.n_steps);
        z[p] = std::exp(paths.log_kernel[idx] - paths.log_price_index[idx] +
                        paths.log_money_market[idx]);
        mean += z[p];
    }
    mean /= paths.n_paths;
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    double se = std::sqrt(ss / (paths.n_paths - 1.0) / paths.n_paths);
    CHECK(std::fabs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("log state arrays stay finite") {
    MarketParams params;
    SimConfig config;
    config.n_paths = 500;
    PathSet paths = simulate_states(params, config, -0.05);
    for (double v : paths.log_price_index) CHECK(std::isfinite(v));
    for (double v : paths.log_kernel) CHECK(std::isfinite(v));
    for (double v : paths.log_money_market) CHECK(std::isfinite(v));
}

TEST_CASE("derived premia satisfy the kernel identity") {
    MarketParams params;
    Vec3 lambda = params.risk_premia();
    CHECK(lambda[0] == doctest::Approx(0.35781).epsilon(1e-10));
    CHECK(lambda[1] == doctest::Approx(-0.205637).epsilon(1e-10));
    CHECK(lambda[2] == doctest::Approx(-0.117622).epsilon(1e-10));
    CHECK(params.risk_premium_u() == doctest::Approx(0.027).epsilon(1e-12));
}
