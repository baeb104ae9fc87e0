#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "dualbound/errors.hpp"

namespace dualbound {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 mat_vec(const Mat3& m, const Vec3& v) {
    return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

// v' M v for symmetric M.
inline double quad_form(const Mat3& m, const Vec3& v) {
    return dot(v, mat_vec(m, v));
}

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// erfc-based for full-tail accuracy; 1 - Phi(x) handled by callers as norm_cdf(-x).
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Lower Cholesky factor of a 3x3 correlation matrix.
// Pivots below -1e-12 mean the matrix is not PSD; tiny negative pivots are
// rounding noise and get clamped to zero.
Mat3 cholesky3(const Mat3& a);

// Solve a 3x3 linear system by Cramer's rule. Throws SingularSigma when the
// determinant is negligible relative to the matrix scale.
Vec3 solve3(const Mat3& a, const Vec3& b);

// --------------------------------------------------------------------------
// Deterministic RNG: one splitmix64 stream per path, so results do not
// depend on how paths are distributed over threads.
// --------------------------------------------------------------------------

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seed for one path: mix the master seed with the path index so that
// neighbouring paths get decorrelated streams.
inline std::uint64_t path_stream_seed(std::uint64_t master_seed, std::uint64_t path_index) {
    std::uint64_t s = master_seed ^ (0x9E3779B97F4A7C15ULL * (path_index + 1));
    return splitmix64_next(s);
}

// Box-Muller over splitmix64. Draws come in pairs; callers that need a fixed
// draw count per step should consume an even number to keep streams aligned.
class NormalRng {
public:
    explicit NormalRng(std::uint64_t stream_seed) : state_(stream_seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // map to (0,1]: (x>>11)+1 in [1, 2^53], scaled by 2^-53
        double u1 = static_cast<double>((splitmix64_next(state_) >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>((splitmix64_next(state_) >> 11) + 1) * 0x1.0p-53;
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586477 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// --------------------------------------------------------------------------
// Scalar bisection on a bracketing interval [lo, hi] with f(lo), f(hi) of
// opposite sign. Returns the midpoint after max_iter halvings or once the
// interval is shorter than xtol.
// --------------------------------------------------------------------------
template <typename F>
double bisect(F&& f, double lo, double hi, double flo, double fhi,
              double xtol, int max_iter) {
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw BracketError("bisect: endpoints do not bracket a root");
    for (int i = 0; i < max_iter && (hi - lo) > xtol; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace dualbound
