#include "dualbound/preferences.hpp"

#include <cmath>

#include "dualbound/errors.hpp"

namespace dualbound {

void Preferences::validate() const {
    if (!(gamma_d > 1.0)) throw ConfigError("gamma_d must exceed 1");
    if (!(gamma_u > 1.0)) throw ConfigError("gamma_u must exceed 1");
    if (!(kink > 0.0)) throw ConfigError("kink must be positive");
}

namespace {

// branch curvature at normalized real wealth z = x / (K pi); ties go down
inline double branch_gamma(double z, const Preferences& prefs) {
    return z <= 1.0 ? prefs.gamma_d : prefs.gamma_u;
}

inline double normalized(double x, double price_index, const Preferences& prefs) {
    return x / (prefs.kink * price_index);
}

} // namespace

double utility(double x, double price_index, const Preferences& prefs) {
    double z = normalized(x, price_index, prefs);
    if (!(z > 0.0)) throw DomainError("utility requires positive real wealth");
    double gamma = branch_gamma(z, prefs);
    return (std::pow(z, 1.0 - gamma) - 1.0) / (1.0 - gamma);
}

double marginal_utility(double x, double price_index, const Preferences& prefs) {
    double z = normalized(x, price_index, prefs);
    if (!(z > 0.0)) throw DomainError("marginal utility requires positive real wealth");
    double gamma = branch_gamma(z, prefs);
    return std::pow(z, -gamma) / (prefs.kink * price_index);
}

double inverse_marginal(double y, double price_index, const Preferences& prefs) {
    if (!(y > 0.0)) throw DomainError("inverse marginal requires positive input");
    // z = (y K pi)^(-1/gamma); the down branch applies iff y K pi >= 1
    double scaled = y * prefs.kink * price_index;
    double gamma = scaled >= 1.0 ? prefs.gamma_d : prefs.gamma_u;
    return prefs.kink * price_index * std::pow(scaled, -1.0 / gamma);
}

double conjugate(double y, double price_index, const Preferences& prefs) {
    if (!(y > 0.0)) throw DomainError("conjugate requires positive input");
    double scaled = y * prefs.kink * price_index;
    double gamma = scaled >= 1.0 ? prefs.gamma_d : prefs.gamma_u;
    double b = 1.0 - 1.0 / gamma;
    return gamma / (1.0 - gamma) * std::pow(scaled, b) - 1.0 / (1.0 - gamma);
}

double rra_reciprocal(double x, double price_index, const Preferences& prefs) {
    double z = normalized(x, price_index, prefs);
    if (!(z > 0.0)) throw DomainError("risk aversion requires positive real wealth");
    return 1.0 / branch_gamma(z, prefs);
}

} // namespace dualbound
