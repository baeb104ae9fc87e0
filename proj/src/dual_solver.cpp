#include "dualbound/dual_solver.hpp"

#include <cmath>
#include <string>

#include "dualbound/errors.hpp"

namespace dualbound {

KernelMoments kernel_moments(double t, double T, double r_t,
                             const MarketParams& params, const Preferences& prefs,
                             double lambda_u_hat) {
    if (T < t) throw DomainError("kernel_moments: T must be >= t");
    double delta = T - t;
    double phi_u_hat = params.xi_u - lambda_u_hat;
    double q = quad_form(params.correlation(), params.phi) + phi_u_hat * phi_u_hat;
    // e = integral of exp(-kappa s) over [0, delta]; b_factor = sigma_r e
    double e = (1.0 - std::exp(-params.kappa * delta)) / params.kappa;
    double sr_k = params.sigma_r / params.kappa;
    double var_r = sr_k * sr_k * (delta - e - 0.5 * params.kappa * e * e);
    Vec3 rho_row_r = {params.rho_sr, 1.0, params.rho_rpi};
    double cov = sr_k * dot(rho_row_r, params.phi) * (delta - e);
    double sigma2 = q * delta + var_r - 2.0 * cov;
    if (sigma2 < -1e-10)
        throw NegativeVariance("kernel variance " + std::to_string(sigma2) + " over [" +
                               std::to_string(t) + ", " + std::to_string(T) + "]");
    if (sigma2 < 0.0) sigma2 = 0.0;
    double m = -(params.r_bar + 0.5 * q) * delta + (params.r_bar - r_t) * e;

    KernelMoments km;
    double b_d = 1.0 - 1.0 / prefs.gamma_d;
    double b_u = 1.0 - 1.0 / prefs.gamma_u;
    km.mu_d = m + b_d * sigma2;
    km.mu_u = m + b_u * sigma2;
    km.sigma_M = std::sqrt(sigma2);
    km.b_factor = params.sigma_r * e;
    return km;
}

double x_gamma(double gamma, double eta, double m, double sigma2) {
    double b = 1.0 - 1.0 / gamma;
    return std::exp(-std::log(eta) / gamma + b * m + 0.5 * b * b * sigma2);
}

BranchState branch_state(double log_eta, double log_kernel, const KernelMoments& km,
                         const Preferences& prefs) {
    double m = kernel_mean(km, prefs);
    double s = km.sigma_M;
    double s2 = s * s;
    double b_d = 1.0 - 1.0 / prefs.gamma_d;
    double b_u = 1.0 - 1.0 / prefs.gamma_u;
    // le = log(eta K M_t): the branch splits at eta K M_T = 1
    double le = log_eta + std::log(prefs.kink) + log_kernel;

    BranchState bs;
    double scale = prefs.kink * std::exp(log_kernel);
    bs.x_d = scale * std::exp(-le / prefs.gamma_d + b_d * m + 0.5 * b_d * b_d * s2);
    bs.x_u = scale * std::exp(-le / prefs.gamma_u + b_u * m + 0.5 * b_u * b_u * s2);
    if (s > 0.0) {
        bs.n_d = norm_cdf((le + m + b_d * s2) / s);
        bs.n_u = norm_cdf(-(le + m + b_u * s2) / s);
    } else {
        bs.n_d = le + m >= 0.0 ? 1.0 : 0.0;
        bs.n_u = 1.0 - bs.n_d;
    }
    bs.value = bs.x_d * bs.n_d + bs.x_u * bs.n_u;
    bs.blend = (bs.value > 0.0)
                   ? (bs.x_d * bs.n_d / prefs.gamma_d + bs.x_u * bs.n_u / prefs.gamma_u) / bs.value
                   : 1.0 / prefs.gamma_d;
    return bs;
}

namespace {

// budget eta for a given shadow price; strictly decreasing in log eta
double solve_eta(const KernelMoments& km, const Preferences& prefs, double x0) {
    auto budget = [&](double log_eta) {
        return branch_state(log_eta, 0.0, km, prefs).value - x0;
    };
    double lo = std::log(1e-8);
    double hi = std::log(1e8);
    double flo = budget(lo);
    double fhi = budget(hi);
    if (!(flo > 0.0) || !(fhi < 0.0))
        throw BracketError("budget equation not bracketed on [1e-8, 1e8]");
    double log_eta = bisect(budget, lo, hi, flo, fhi, 1e-14, 200);
    return std::exp(log_eta);
}

} // namespace

Controls solve_dual(const MarketParams& params, const Preferences& prefs,
                    double x0, double T) {
    prefs.validate();
    if (!(x0 > 0.0)) throw ConfigError("initial wealth must be positive");
    if (!(T > 0.0)) throw ConfigError("horizon must be positive");

    double lhat = (1.0 - 0.5 * (prefs.gamma_d + prefs.gamma_u)) * params.xi_u;
    double eta = 1.0;
    bool settled = false;
    for (int it = 0; it < 200; ++it) {
        KernelMoments km = kernel_moments(0.0, T, params.r0, params, prefs, lhat);
        eta = solve_eta(km, prefs, x0);
        BranchState bs = branch_state(std::log(eta), 0.0, km, prefs);
        double spending = bs.blend * bs.value; // sum of (1/gamma_i) branch terms
        double next = (1.0 - x0 / spending) * params.xi_u;
        if (std::fabs(next - lhat) < 1e-12) {
            lhat = next;
            settled = true;
            break;
        }
        lhat = 0.5 * lhat + 0.5 * next; // damped to keep the iteration stable
    }
    KernelMoments km = kernel_moments(0.0, T, params.r0, params, prefs, lhat);
    eta = solve_eta(km, prefs, x0);
    BranchState bs = branch_state(std::log(eta), 0.0, km, prefs);
    double spending = bs.blend * bs.value;
    double budget_residual = std::fabs(bs.value - x0);
    double shadow_residual = std::fabs((1.0 - x0 / spending) * params.xi_u - lhat);
    if (!settled || budget_residual > 1e-10 || shadow_residual > 1e-10)
        throw NoConvergence("dual system residuals " + std::to_string(budget_residual) +
                            ", " + std::to_string(shadow_residual));

    Controls out;
    out.eta = eta;
    out.lambda_u_hat = lhat;
    out.side = Controls::Side::dual;
    return out;
}

double upper_bound(const Controls& controls, const MarketParams& params,
                   const Preferences& prefs, double x0, double T) {
    KernelMoments km = kernel_moments(0.0, T, params.r0, params, prefs,
                                      controls.lambda_u_hat);
    double log_eta = std::log(controls.eta);
    BranchState bs = branch_state(log_eta, 0.0, km, prefs);
    double m = kernel_mean(km, prefs);
    double s = km.sigma_M;
    double le = log_eta + std::log(prefs.kink);
    double n1 = s > 0.0 ? norm_cdf((le + m) / s) : (le + m >= 0.0 ? 1.0 : 0.0);
    double h = n1 / (1.0 - prefs.gamma_d) + (1.0 - n1) / (1.0 - prefs.gamma_u);
    double g_d = prefs.gamma_d / (1.0 - prefs.gamma_d);
    double g_u = prefs.gamma_u / (1.0 - prefs.gamma_u);
    return controls.eta * (g_d * bs.x_d * bs.n_d + g_u * bs.x_u * bs.n_u) - h +
           controls.eta * x0;
}

} // namespace dualbound
