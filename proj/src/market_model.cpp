#include "dualbound/market_model.hpp"

#include <cmath>
#include <string>
#include <thread>

#include "dualbound/errors.hpp"

namespace dualbound {

Mat3 cholesky3(const Mat3& a) {
    // pivots below -1e-12 fail PSD; tiny negatives are rounding noise
    Mat3 l = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
            if (i == j) {
                if (sum < -1e-12)
                    throw NotPositiveSemiDefinite(
                        "correlation matrix has negative pivot " + std::to_string(sum));
                l[i][i] = std::sqrt(sum < 0.0 ? 0.0 : sum);
            } else {
                l[i][j] = (l[j][j] != 0.0) ? sum / l[j][j] : 0.0;
            }
        }
    }
    return l;
}

Vec3 solve3(const Mat3& a, const Vec3& b) {
    double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                 a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                 a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    double scale = 0.0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::fabs(v));
    if (std::fabs(det) <= 1e-14 * std::max(1.0, scale * scale * scale))
        throw SingularSigma("asset loading matrix is singular");
    auto det3 = [](const Mat3& m) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    Vec3 out;
    for (int c = 0; c < 3; ++c) {
        Mat3 m = a;
        for (int r = 0; r < 3; ++r) m[r][c] = b[r];
        out[c] = det3(m) / det;
    }
    return out;
}

void MarketParams::validate(double horizon) const {
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(sigma_s > 0.0)) throw ConfigError("sigma_s must be positive");
    if (sigma_r < 0.0) throw ConfigError("sigma_r must be nonnegative");
    if (sigma_pi < 0.0) throw ConfigError("sigma_pi must be nonnegative");
    cholesky3(correlation()); // throws NotPositiveSemiDefinite
    if (!(bond_maturity_1 > horizon))
        throw ConfigError("bond_maturity_1 must exceed the horizon");
    if (!(bond_maturity_2 > horizon))
        throw ConfigError("bond_maturity_2 must exceed the horizon");
}

Mat3 correlation_factor(const MarketParams& params) {
    return cholesky3(params.correlation());
}

double nominal_rate(double r, double pi, const MarketParams& params, double lambda_u_eff) {
    Vec3 lambda = {params.lambda_s, params.lambda_r, params.lambda_pi};
    return r + pi - dot(params.xi, lambda) - params.xi_u * lambda_u_eff;
}

double rate_duration(double t, double maturity, const MarketParams& params) {
    return params.sigma_r / params.kappa * (1.0 - std::exp(-params.kappa * (maturity - t)));
}

Mat3 sigma_matrix(double t, const MarketParams& params) {
    Mat3 sigma = {{{params.sigma_s, 0.0, 0.0}, {0, 0, 0}, {0, 0, 0}}};
    double maturities[2] = {params.bond_maturity_1, params.bond_maturity_2};
    for (int i = 0; i < 2; ++i) {
        if (maturities[i] <= t)
            throw SingularSigma("bond maturity does not exceed valuation time");
        sigma[1 + i][1] = -rate_duration(t, maturities[i], params);
        sigma[1 + i][2] = -params.sigma_pi / params.alpha *
                          (1.0 - std::exp(-params.alpha * (maturities[i] - t)));
    }
    // degenerate rows (maturity == t or zero vols) must not reach the solver
    if (sigma[1][1] == 0.0 && sigma[1][2] == 0.0)
        throw SingularSigma("bond 1 has no diffusion exposure");
    if (sigma[2][1] == 0.0 && sigma[2][2] == 0.0)
        throw SingularSigma("bond 2 has no diffusion exposure");
    return sigma;
}

namespace {

void simulate_block(const MarketParams& params, const SimConfig& config,
                    double lambda_u_eff, const Mat3& l_factor, PathSet& out,
                    int path_begin, int path_end) {
    const int m_steps = out.n_steps;
    const double dt = config.dt;
    const double sq_dt = std::sqrt(dt);
    const Vec3& phi = params.phi;
    const double phi_u_hat = params.xi_u - lambda_u_eff;
    // kernel quadratic variation rate; non-traded shock is independent
    const double q_kernel = quad_form(params.correlation(), phi) + phi_u_hat * phi_u_hat;
    const double q_index = quad_form(params.correlation(), params.xi) + params.xi_u * params.xi_u;

    for (int p = path_begin; p < path_end; ++p) {
        NormalRng rng(path_stream_seed(config.seed, static_cast<std::uint64_t>(p)));
        double r = params.r0;
        double pi = params.pi0;
        double log_pi_level = 0.0;
        double log_m = 0.0;
        double int_rf = 0.0;

        std::size_t base = out.idx(p, 0);
        out.r[base] = r;
        out.pi[base] = pi;
        out.log_price_index[base] = 0.0;
        out.log_kernel[base] = 0.0;
        out.log_money_market[base] = 0.0;

        for (int k = 0; k < m_steps; ++k) {
            double eps0 = rng.next();
            double eps1 = rng.next();
            double eps2 = rng.next();
            double eps3 = rng.next();
            Vec3 eps = {eps0, eps1, eps2};
            Vec3 dz = mat_vec(l_factor, eps);
            dz[0] *= sq_dt;
            dz[1] *= sq_dt;
            dz[2] *= sq_dt;
            double dz_u = eps3 * sq_dt;

            std::size_t dzb = out.dz_idx(p, k, 0);
            out.dz[dzb + 0] = dz[0];
            out.dz[dzb + 1] = dz[1];
            out.dz[dzb + 2] = dz[2];
            out.dz[dzb + 3] = dz_u;

            double rf = nominal_rate(r, pi, params, lambda_u_eff);
            int_rf += rf * dt; // left point
            log_pi_level += (pi - 0.5 * q_index) * dt + dot(params.xi, dz) + params.xi_u * dz_u;
            log_m += (-r - 0.5 * q_kernel) * dt + dot(phi, dz) + phi_u_hat * dz_u;
            r += params.kappa * (params.r_bar - r) * dt + params.sigma_r * dz[1];
            pi += params.alpha * (params.pi_bar - pi) * dt + params.sigma_pi * dz[2];

            std::size_t next = out.idx(p, k + 1);
            out.r[next] = r;
            out.pi[next] = pi;
            out.log_price_index[next] = log_pi_level;
            out.log_kernel[next] = log_m;
            out.log_money_market[next] = int_rf;
        }
    }
}

} // namespace

PathSet simulate_states(const MarketParams& params, const SimConfig& config,
                        double lambda_u_eff) {
    if (config.n_paths < 2) throw ConfigError("n_paths must be at least 2");
    if (!(config.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(config.horizon > 0.0)) throw ConfigError("horizon must be positive");
    long long m_steps = std::llround(config.horizon / config.dt);
    if (m_steps <= 0 || std::fabs(m_steps * config.dt - config.horizon) > 1e-9 * std::max(1.0, config.horizon))
        throw ConfigError("horizon must be an integer number of dt steps");
    params.validate(config.horizon);

    PathSet out;
    out.n_paths = config.n_paths;
    out.n_steps = static_cast<int>(m_steps);
    out.dt = config.dt;
    out.lambda_u_eff = lambda_u_eff;
    out.grid.resize(out.n_steps + 1);
    for (int k = 0; k <= out.n_steps; ++k) out.grid[k] = k * config.dt;

    std::size_t n_states = static_cast<std::size_t>(out.n_paths) * (out.n_steps + 1);
    out.r.resize(n_states);
    out.pi.resize(n_states);
    out.log_price_index.resize(n_states);
    out.log_kernel.resize(n_states);
    out.log_money_market.resize(n_states);
    out.dz.resize(static_cast<std::size_t>(out.n_paths) * out.n_steps * 4);

    Mat3 l_factor = correlation_factor(params);

    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = static_cast<int>(hw == 0 ? 1 : hw);
    if (n_threads > out.n_paths) n_threads = out.n_paths;
    if (n_threads <= 1) {
        simulate_block(params, config, lambda_u_eff, l_factor, out, 0, out.n_paths);
        return out;
    }
    std::vector<std::thread> workers;
    int chunk = (out.n_paths + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
        int lo = w * chunk;
        int hi = std::min(out.n_paths, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back(simulate_block, std::cref(params), std::cref(config),
                             lambda_u_eff, std::cref(l_factor), std::ref(out), lo, hi);
    }
    for (auto& t : workers) t.join();
    return out;
}

} // namespace dualbound
