#include "dualbound/primal_engine.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "dualbound/errors.hpp"

namespace dualbound {

Vec3 portfolio_weights(double t, double T, const StateSlice& state,
                       const Controls& controls, const MarketParams& params,
                       const Preferences& prefs) {
    KernelMoments km = kernel_moments(t, T, state.r, params, prefs, controls.lambda_u_hat);
    BranchState bs = branch_state(std::log(controls.eta), state.log_kernel, km, prefs);
    Vec3 lambda = params.risk_premia();
    Vec3 hedge = {params.xi[0], params.xi[1] - km.b_factor, params.xi[2]};
    Vec3 exposure;
    for (int i = 0; i < 3; ++i)
        exposure[i] = (lambda[i] - hedge[i]) * bs.blend + hedge[i];
    Mat3 sigma = sigma_matrix(t, params);
    Mat3 sigma_t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sigma_t[i][j] = sigma[j][i];
    return solve3(sigma_t, exposure);
}

double market_value_wealth(double t, double T, const StateSlice& state,
                           const Controls& controls, const MarketParams& params,
                           const Preferences& prefs) {
    KernelMoments km = kernel_moments(t, T, state.r, params, prefs, controls.lambda_u_hat);
    BranchState bs = branch_state(std::log(controls.eta), state.log_kernel, km, prefs);
    // deflate by the nominal state price density Z_t = M_t / Pi_t
    double z = std::exp(state.log_kernel - state.log_price_index);
    return bs.value / z;
}

namespace {

// Per-step constants for the wealth recursion: the kernel moment pieces that
// do not depend on the path, plus the quadratic-variation polynomial in the
// blend weight w (exposure = base + w * slope).
struct StepTable {
    std::vector<double> sigma2, sigma, m_const, m_slope, b_factor;
    std::vector<double> drift_w, drift_c;      // exposure' lambda = drift_c + w drift_w
    std::vector<double> qv_ww, qv_w, qv_c;     // exposure' rho exposure in powers of w
    std::vector<Vec3> base, slope;             // exposure = base + w slope
    double rf_shift = 0.0;                     // R_f = r + pi + rf_shift
    double log_eta_kink = 0.0;                 // log(eta K)
    double b_d = 0.0, b_u = 0.0;
    // kernel signal retilt: the stored kernel was simulated under the path
    // completion, so a candidate shadow price shifts the signal by
    // tilt * cum_zu + drift * t along each path (zero when they coincide)
    double signal_tilt = 0.0;
    double signal_drift = 0.0;
};

StepTable build_step_table(const PathSet& paths, const Controls& controls,
                           const MarketParams& params, const Preferences& prefs,
                           double T) {
    StepTable st;
    int m_steps = paths.n_steps;
    st.sigma2.resize(m_steps);
    st.sigma.resize(m_steps);
    st.m_const.resize(m_steps);
    st.m_slope.resize(m_steps);
    st.b_factor.resize(m_steps);
    st.drift_w.resize(m_steps);
    st.drift_c.resize(m_steps);
    st.qv_ww.resize(m_steps);
    st.qv_w.resize(m_steps);
    st.qv_c.resize(m_steps);
    st.base.resize(m_steps);
    st.slope.resize(m_steps);

    Mat3 rho = params.correlation();
    Vec3 lambda = params.risk_premia();
    double phi_u_hat = params.xi_u - controls.lambda_u_hat;
    double q = quad_form(rho, params.phi) + phi_u_hat * phi_u_hat;
    double sr_k = params.sigma_r / params.kappa;
    Vec3 rho_row_r = {params.rho_sr, 1.0, params.rho_rpi};
    double cov_rate = sr_k * dot(rho_row_r, params.phi);

    for (int k = 0; k < m_steps; ++k) {
        double delta = T - paths.grid[k];
        double e = (1.0 - std::exp(-params.kappa * delta)) / params.kappa;
        double var_r = sr_k * sr_k * (delta - e - 0.5 * params.kappa * e * e);
        double sigma2 = q * delta + var_r - 2.0 * cov_rate * (delta - e);
        if (sigma2 < -1e-10) throw NegativeVariance("kernel variance negative in recursion");
        st.sigma2[k] = std::max(sigma2, 0.0);
        st.sigma[k] = std::sqrt(st.sigma2[k]);
        st.m_const[k] = -(params.r_bar + 0.5 * q) * delta + params.r_bar * e;
        st.m_slope[k] = -e;
        st.b_factor[k] = params.sigma_r * e;

        Vec3 hedge = {params.xi[0], params.xi[1] - st.b_factor[k], params.xi[2]};
        Vec3 slope;
        for (int i = 0; i < 3; ++i) slope[i] = lambda[i] - hedge[i];
        st.base[k] = hedge;
        st.slope[k] = slope;
        st.drift_c[k] = dot(hedge, lambda);
        st.drift_w[k] = dot(slope, lambda);
        st.qv_ww[k] = quad_form(rho, slope);
        st.qv_w[k] = dot(slope, mat_vec(rho, hedge)); // appears twice in the square
        st.qv_c[k] = quad_form(rho, hedge);
    }

    Vec3 lambda_quoted = {params.lambda_s, params.lambda_r, params.lambda_pi};
    st.rf_shift = -dot(params.xi, lambda_quoted) - params.xi_u * paths.lambda_u_eff;
    double phi_u_path = params.xi_u - paths.lambda_u_eff;
    st.signal_tilt = phi_u_hat - phi_u_path;
    st.signal_drift = -0.5 * st.signal_tilt * (phi_u_hat + phi_u_path);
    st.log_eta_kink = std::log(controls.eta) + std::log(prefs.kink);
    st.b_d = 1.0 - 1.0 / prefs.gamma_d;
    st.b_u = 1.0 - 1.0 / prefs.gamma_u;
    return st;
}

void wealth_block(const PathSet& paths, const StepTable& st, const Preferences& prefs,
                  const MarketParams& params, double T, double x0, WealthOptions options,
                  WealthSample& out, int path_begin, int path_end) {
    const int m_steps = paths.n_steps;
    const double dt = paths.dt;
    const double inv_gd = 1.0 / prefs.gamma_d;
    const double inv_gu = 1.0 / prefs.gamma_u;
    const double consumption = 0.0; // intermediate spending hook, off

    for (int p = path_begin; p < path_end; ++p) {
        double log_x = std::log(x0);
        double cum_zu = 0.0;
        for (int k = 0; k < m_steps; ++k) {
            std::size_t s_idx = paths.idx(p, k);
            double r = paths.r[s_idx];
            double pi = paths.pi[s_idx];

            if (options.record_trajectories)
                out.wealth_paths[paths.idx(p, k)] = std::exp(log_x);

            if (options.zero_allocation) {
                log_x += (r + pi + st.rf_shift) * dt;
                if (options.record_trajectories) {
                    std::size_t wb = (static_cast<std::size_t>(p) * m_steps + k) * 3;
                    out.weight_paths[wb + 0] = 0.0;
                    out.weight_paths[wb + 1] = 0.0;
                    out.weight_paths[wb + 2] = 0.0;
                }
                continue;
            }

            double log_m_t = paths.log_kernel[s_idx];
            if (st.signal_tilt != 0.0)
                log_m_t += st.signal_tilt * cum_zu + st.signal_drift * paths.grid[k];
            double m = st.m_const[k] + st.m_slope[k] * r;
            double s2 = st.sigma2[k];
            double s = st.sigma[k];
            double le = st.log_eta_kink + log_m_t;

            double w;
            double a_d = -le * inv_gd + st.b_d * (m + 0.5 * st.b_d * s2);
            double a_u = -le * inv_gu + st.b_u * (m + 0.5 * st.b_u * s2);
            double n_d, n_u;
            if (s > 0.0) {
                n_d = norm_cdf((le + m + st.b_d * s2) / s);
                n_u = norm_cdf(-(le + m + st.b_u * s2) / s);
            } else {
                n_d = le + m >= 0.0 ? 1.0 : 0.0;
                n_u = 1.0 - n_d;
            }
            double shift = std::max(a_d, a_u);
            double t_d = std::exp(a_d - shift) * n_d;
            double t_u = std::exp(a_u - shift) * n_u;
            double total = t_d + t_u;
            w = total > 0.0 ? (t_d * inv_gd + t_u * inv_gu) / total : inv_gd;

            double rf = r + pi + st.rf_shift;
            double qv = (st.qv_ww[k] * w + 2.0 * st.qv_w[k]) * w + st.qv_c[k];
            double drift = rf + st.drift_c[k] + w * st.drift_w[k] - 0.5 * qv - consumption;

            std::size_t dzb = paths.dz_idx(p, k, 0);
            double shock = 0.0;
            for (int i = 0; i < 3; ++i)
                shock += (st.base[k][i] + w * st.slope[k][i]) * paths.dz[dzb + i];
            log_x += drift * dt + shock;
            cum_zu += paths.dz[dzb + 3];

            if (options.record_trajectories) {
                Vec3 exposure;
                for (int i = 0; i < 3; ++i) exposure[i] = st.base[k][i] + w * st.slope[k][i];
                Mat3 sigma = sigma_matrix(paths.grid[k], params);
                Mat3 sigma_t;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) sigma_t[i][j] = sigma[j][i];
                Vec3 weights = solve3(sigma_t, exposure);
                std::size_t wb = (static_cast<std::size_t>(p) * m_steps + k) * 3;
                out.weight_paths[wb + 0] = weights[0];
                out.weight_paths[wb + 1] = weights[1];
                out.weight_paths[wb + 2] = weights[2];
            }
        }
        out.terminal_wealth[p] = std::exp(log_x);
        out.terminal_price_index[p] = std::exp(paths.log_price_index[paths.idx(p, m_steps)]);
        if (options.record_trajectories)
            out.wealth_paths[paths.idx(p, m_steps)] = out.terminal_wealth[p];
    }
}

} // namespace

WealthSample simulate_wealth(const PathSet& paths, const Controls& controls,
                             const MarketParams& params, const Preferences& prefs,
                             double x0, WealthOptions options) {
    if (!(x0 > 0.0)) throw ConfigError("initial wealth must be positive");
    if (!(controls.eta > 0.0)) throw ConfigError("eta must be positive");
    prefs.validate();

    double T = paths.grid.empty() ? 0.0 : paths.grid.back();
    WealthSample out;
    out.n_paths = paths.n_paths;
    out.n_steps = paths.n_steps;
    out.dt = paths.dt;
    out.x0 = x0;
    out.horizon = T;
    out.terminal_wealth.resize(paths.n_paths);
    out.terminal_price_index.resize(paths.n_paths);
    if (options.record_trajectories) {
        out.weight_paths.resize(static_cast<std::size_t>(paths.n_paths) * paths.n_steps * 3);
        out.wealth_paths.resize(static_cast<std::size_t>(paths.n_paths) * (paths.n_steps + 1));
    }

    StepTable st = build_step_table(paths, controls, params, prefs, T);

    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = static_cast<int>(hw == 0 ? 1 : hw);
    if (n_threads > paths.n_paths) n_threads = paths.n_paths;
    if (n_threads <= 1) {
        wealth_block(paths, st, prefs, params, T, x0, options, out, 0, paths.n_paths);
        return out;
    }
    std::vector<std::thread> workers;
    int chunk = (paths.n_paths + n_threads - 1) / n_threads;
    for (int wi = 0; wi < n_threads; ++wi) {
        int lo = wi * chunk;
        int hi = std::min(paths.n_paths, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back(wealth_block, std::cref(paths), std::cref(st), std::cref(prefs),
                             std::cref(params), T, x0, options, std::ref(out), lo, hi);
    }
    for (auto& t : workers) t.join();
    return out;
}

LowerBoundEstimate lower_bound(const WealthSample& sample, const Preferences& prefs) {
    if (sample.terminal_wealth.empty()) throw DomainError("empty wealth sample");
    std::size_t n = sample.terminal_wealth.size();
    double mean = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = utility(sample.terminal_wealth[i], sample.terminal_price_index[i], prefs);
        mean += u[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = u[i] - mean;
        ss += d * d;
    }
    double se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n)) : 0.0;

    LowerBoundEstimate est;
    est.value = mean;
    est.std_error = se;
    est.ci_lo = mean - 1.96 * se;
    est.ci_hi = mean + 1.96 * se;
    return est;
}

namespace {

struct Vertex {
    double lu = 0.0;
    double eta = 0.0;
    double f = 0.0; // objective, maximized
};

} // namespace

OptimizeResult optimize_primal(const PathSet& paths, const MarketParams& params,
                               const Preferences& prefs, const SimConfig& config,
                               const Controls& init) {
    if (!(init.eta > 0.0)) throw ConfigError("initial eta must be positive");
    const int max_evals = 200;
    int evals = 0;

    // Local refinement only. The sample objective keeps creeping upward in eta
    // well past the point where the true improvement is exhausted (the shared
    // path set rewards ever more conservative tilts), so an unbounded search
    // drifts far from anything the analytical start certifies. The refinement
    // is therefore confined to a trust region around the start: two percent on
    // the multiplier, five percent of the curvature spread on the shadow
    // price, which also stays inside its admissible bracket.
    const double eta_lo = init.eta * 0.98;
    const double eta_hi = init.eta * 1.02;
    const double lu_radius =
        0.05 * std::fabs((prefs.gamma_d - prefs.gamma_u) * params.xi_u);
    const double b_d = (1.0 - prefs.gamma_d) * params.xi_u;
    const double b_u = (1.0 - prefs.gamma_u) * params.xi_u;
    // the start itself is always admissible, whatever rounding does
    const double lu_lo = std::min(init.lambda_u_hat,
                                  std::max(init.lambda_u_hat - lu_radius, std::min(b_d, b_u)));
    const double lu_hi = std::max(init.lambda_u_hat,
                                  std::min(init.lambda_u_hat + lu_radius, std::max(b_d, b_u)));

    auto objective = [&](double lu, double eta) {
        if (!(eta > 0.0)) return -1e300;
        if (eta < eta_lo || eta > eta_hi || lu < lu_lo || lu > lu_hi) return -1e300;
        Controls c;
        c.eta = eta;
        c.lambda_u_hat = lu;
        c.side = Controls::Side::primal;
        ++evals;
        return lower_bound(simulate_wealth(paths, c, params, prefs, config.x0), prefs).value;
    };

    Vertex best{init.lambda_u_hat, init.eta, 0.0};
    best.f = objective(init.lambda_u_hat, init.eta);
    double init_value = best.f;

    // With a single curvature the weights no longer depend on wealth, so the
    // multiplier never enters the strategy and the shadow price already sits
    // at its fixed point: the surface is flat up to noise and a simplex walk
    // would only drift along ties. Report the start as converged.
    if (prefs.gamma_d == prefs.gamma_u) {
        OptimizeResult res;
        res.controls = init;
        res.controls.side = Controls::Side::primal;
        res.value = init_value;
        res.evaluations = evals;
        res.converged = true;
        return res;
    }

    const double lu_off =
        std::max(0.0, std::min(0.005, 0.5 * (lu_hi - init.lambda_u_hat)));
    const double eta_off = std::min(0.01, 0.01 * init.eta);
    Vertex simplex[3] = {
        {init.lambda_u_hat, init.eta, best.f},
        {init.lambda_u_hat + lu_off, init.eta, 0.0},
        {init.lambda_u_hat, init.eta + eta_off, 0.0},
    };
    simplex[1].f = objective(simplex[1].lu, simplex[1].eta);
    simplex[2].f = objective(simplex[2].lu, simplex[2].eta);
    for (int i = 1; i < 3; ++i)
        if (simplex[i].f > best.f) best = simplex[i];

    bool converged = false;
    while (evals < max_evals) {
        std::sort(simplex, simplex + 3, [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
        double diam = 0.0;
        for (int i = 1; i < 3; ++i) {
            diam = std::max(diam, std::fabs(simplex[i].lu - simplex[0].lu));
            diam = std::max(diam, std::fabs(simplex[i].eta - simplex[0].eta));
        }
        if (diam < 1e-6) {
            converged = true;
            break;
        }
        double c_lu = 0.5 * (simplex[0].lu + simplex[1].lu);
        double c_eta = 0.5 * (simplex[0].eta + simplex[1].eta);
        Vertex& worst = simplex[2];

        Vertex refl{c_lu + (c_lu - worst.lu), c_eta + (c_eta - worst.eta), 0.0};
        refl.f = objective(refl.lu, refl.eta);
        if (refl.f > best.f) best = refl;

        if (refl.f > simplex[0].f) {
            Vertex expd{c_lu + 2.0 * (c_lu - worst.lu), c_eta + 2.0 * (c_eta - worst.eta), 0.0};
            if (evals < max_evals) {
                expd.f = objective(expd.lu, expd.eta);
                if (expd.f > best.f) best = expd;
                worst = expd.f > refl.f ? expd : refl;
            } else {
                worst = refl;
            }
        } else if (refl.f > simplex[1].f) {
            worst = refl;
        } else {
            Vertex contr{c_lu + 0.5 * (worst.lu - c_lu), c_eta + 0.5 * (worst.eta - c_eta), 0.0};
            if (evals >= max_evals) break;
            contr.f = objective(contr.lu, contr.eta);
            if (contr.f > best.f) best = contr;
            if (contr.f > worst.f) {
                worst = contr;
            } else {
                // shrink toward the current best vertex
                for (int i = 1; i < 3; ++i) {
                    simplex[i].lu = simplex[0].lu + 0.5 * (simplex[i].lu - simplex[0].lu);
                    simplex[i].eta = simplex[0].eta + 0.5 * (simplex[i].eta - simplex[0].eta);
                    if (evals >= max_evals) break;
                    simplex[i].f = objective(simplex[i].lu, simplex[i].eta);
                    if (simplex[i].f > best.f) best = simplex[i];
                }
            }
        }
    }

    OptimizeResult res;
    res.controls.eta = best.eta;
    res.controls.lambda_u_hat = best.lu;
    res.controls.side = Controls::Side::primal;
    res.value = std::max(best.f, init_value); // never report below the start
    res.evaluations = evals;
    res.converged = converged;
    if (best.f < init_value) {
        res.controls.eta = init.eta;
        res.controls.lambda_u_hat = init.lambda_u_hat;
        res.value = init_value;
    }
    return res;
}

OptimizeResult optimize_primal(const MarketParams& params, const Preferences& prefs,
                               const SimConfig& config, const Controls& init) {
    PathSet paths = simulate_states(params, config, init.lambda_u_hat);
    return optimize_primal(paths, params, prefs, config, init);
}

} // namespace dualbound
