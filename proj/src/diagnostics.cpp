#include "dualbound/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "dualbound/errors.hpp"

namespace dualbound {

namespace {

// Mean terminal utility when initial wealth is scaled by (1 + s). The
// projected strategy is homogeneous in wealth, so scaling the endowment
// scales every terminal wealth draw by the same factor.
double scaled_value(const WealthSample& sample, const Preferences& prefs, double s) {
    double mean = 0.0;
    std::size_t n = sample.terminal_wealth.size();
    for (std::size_t i = 0; i < n; ++i)
        mean += utility((1.0 + s) * sample.terminal_wealth[i],
                        sample.terminal_price_index[i], prefs);
    return mean / static_cast<double>(n);
}

} // namespace

double compensating_variation(const WealthSample& sample, const Preferences& prefs,
                              double j_upper, double x0) {
    if (sample.terminal_wealth.empty()) throw DomainError("empty wealth sample");
    if (!(x0 > 0.0)) throw ConfigError("initial wealth must be positive");

    if (scaled_value(sample, prefs, 0.0) >= j_upper) return 0.0;
    if (scaled_value(sample, prefs, 1.0) < j_upper)
        throw BracketError("doubling initial wealth does not reach the upper bound");

    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        double val = scaled_value(sample, prefs, mid);
        if (std::fabs(val - j_upper) < 1e-10) return mid * x0;
        if (val < j_upper)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi) * x0;
}

double annual_loss(double cv, double x0, double T) {
    if (!(x0 > 0.0)) throw ConfigError("initial wealth must be positive");
    if (!(T > 0.0)) throw ConfigError("horizon must be positive");
    return (std::pow(1.0 + cv / x0, 1.0 / T) - 1.0) * 1e4;
}

DensityEstimate kde(const std::vector<double>& samples, double bandwidth) {
    if (samples.empty()) throw DomainError("kde requires at least one sample");
    if (!(bandwidth > 0.0)) throw DomainError("kde bandwidth must be positive");

    auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn_it - 3.0 * bandwidth;
    double hi = *mx_it + 3.0 * bandwidth;

    const int n_grid = 512;
    DensityEstimate out;
    out.x.resize(n_grid);
    out.density.assign(n_grid, 0.0);
    double step = (hi - lo) / (n_grid - 1);
    for (int i = 0; i < n_grid; ++i) out.x[i] = lo + i * step;

    double scale = 1.0 / (bandwidth * static_cast<double>(samples.size()));
    for (int i = 0; i < n_grid; ++i) {
        double acc = 0.0;
        for (double s : samples) acc += norm_pdf((out.x[i] - s) / bandwidth);
        out.density[i] = acc * scale;
    }
    return out;
}

std::vector<std::pair<double, double>> allocation_curve(
    const Preferences& prefs, double lambda, double sigma, double T,
    const std::vector<double>& wealth_grid) {
    prefs.validate();
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(T > 0.0)) throw ConfigError("horizon must be positive");

    // one risky asset, zero rates, unit price index: the log kernel over
    // [0, T] is N(-lambda^2 T / 2, lambda^2 T)
    KernelMoments km;
    double s2 = lambda * lambda * T;
    double m = -0.5 * s2;
    double b_d = 1.0 - 1.0 / prefs.gamma_d;
    double b_u = 1.0 - 1.0 / prefs.gamma_u;
    km.mu_d = m + b_d * s2;
    km.mu_u = m + b_u * s2;
    km.sigma_M = std::sqrt(s2);
    km.b_factor = 0.0;

    std::vector<std::pair<double, double>> out;
    out.reserve(wealth_grid.size());
    for (double x : wealth_grid) {
        if (!(x > 0.0)) throw DomainError("wealth grid must be positive");
        auto budget = [&](double log_eta) {
            return branch_state(log_eta, 0.0, km, prefs).value - x;
        };
        double lo = -50.0, hi = 50.0;
        double flo = budget(lo), fhi = budget(hi);
        int guard = 0;
        while (flo < 0.0 && guard++ < 16) {
            lo *= 2.0;
            flo = budget(lo);
        }
        guard = 0;
        while (fhi > 0.0 && guard++ < 16) {
            hi *= 2.0;
            fhi = budget(hi);
        }
        if (flo < 0.0 || fhi > 0.0)
            throw BracketError("allocation curve budget not bracketed");
        double log_eta = bisect(budget, lo, hi, flo, fhi, 1e-13, 300);
        double w = branch_state(log_eta, 0.0, km, prefs).blend;
        out.emplace_back(x, w * lambda / sigma);
    }
    return out;
}

} // namespace dualbound
