#pragma once

namespace dualbound {

// Two-branch power utility over real wealth with a kink at x / pi = K:
// curvature gamma_d applies at or below the kink, gamma_u above it.
// gamma_d == gamma_u recovers CRRA. Marginal utility is continuous at the
// kink, so the function is concave and C1.
struct Preferences {
    double gamma_d = 10.0;
    double gamma_u = 2.0;
    double kink = 1.0; // K, in units of the price index

    bool is_crra() const { return gamma_d == gamma_u; }

    void validate() const; // gamma_d > 1, gamma_u > 1, kink > 0
};

// U(x, pi) = ((x/(K pi))^(1-gamma) - 1) / (1 - gamma), branch by x/pi vs K.
double utility(double x, double price_index, const Preferences& prefs);

// dU/dx; continuous across the kink.
double marginal_utility(double x, double price_index, const Preferences& prefs);

// x such that marginal_utility(x, pi) = y.
double inverse_marginal(double y, double price_index, const Preferences& prefs);

// Convex conjugate V(y, pi) = sup_x { U(x, pi) - y x }.
double conjugate(double y, double price_index, const Preferences& prefs);

// Reciprocal of relative risk aversion at the point (ties go to gamma_d).
double rra_reciprocal(double x, double price_index, const Preferences& prefs);

} // namespace dualbound
