#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/steady_state.hpp>

namespace elapse {

/// Orbit I0, phi(I0), ..., phi^k(I0).
inline std::vector<double> iterate_phi(const RateModel& m, const Grid& g, double I0,
                                       std::size_t k) {
    std::vector<double> orbit(k + 1);
    orbit[0] = m.clamp_activity(I0);
    for (std::size_t i = 1; i <= k; ++i) orbit[i] = phi(m, g, orbit[i - 1]);
    return orbit;
}

/// Richardson-extrapolated central difference of the activity map,
/// h = 1e-5 r_max. Falls back to a one-sided second-order stencil near the
/// ends of [0, r_max] and reports it through `warned`.
inline double phi_prime(const RateModel& m, const Grid& g, double I,
                        bool* warned = nullptr) {
    const double h = 1e-5 * m.r_max();
    if (warned) *warned = false;
    auto f = [&](double v) { return phi(m, g, v); };
    if (I - h < 0.0 || I + h > m.r_max()) {
        if (warned) *warned = true;
        const double s = I - h < 0.0 ? 1.0 : -1.0;
        return s * (-3.0 * f(I) + 4.0 * f(I + s * h) - f(I + 2.0 * s * h)) / (2.0 * h);
    }
    auto central = [&](double hh) { return (f(I + hh) - f(I - hh)) / (2.0 * hh); };
    const double d1 = central(h);
    const double d2 = central(0.5 * h);
    return (4.0 * d2 - d1) / 3.0;
}

enum class MapClassification { Converging, Period2 };

struct MapAnalysis {
    double I_bar = 0.0;
    double phi_prime_at_fp = 0.0;
    std::optional<std::pair<double, double>> period2; // (I_minus, I_plus)
    MapClassification classification = MapClassification::Converging;
    double residual = 0.0;
};

namespace detail {

/// First sign change of H(I) = phi(phi(I)) - I scanned upward from 0, then
/// bisected. Returns the extreme lower fixed point of the composed map.
inline std::optional<double> lowest_period2_root(const RateModel& m, const Grid& g,
                                                 double I_bar) {
    auto H = [&](double I) { return phi(m, g, phi(m, g, I)) - I; };
    double eps = 1e-3 * m.r_max();
    for (int attempt = 0; attempt < 10; ++attempt, eps *= 0.5) {
        const double hi = I_bar - eps;
        if (hi <= 0.0) continue;
        constexpr std::size_t scan = 2048;
        double prev_x = 0.0;
        double prev_h = H(0.0);
        bool found = false;
        double lo_x = 0.0, hi_x = 0.0;
        for (std::size_t k = 1; k <= scan; ++k) {
            const double x = hi * static_cast<double>(k) / scan;
            const double hx = H(x);
            if (prev_h > 0.0 && hx <= 0.0) {
                lo_x = prev_x;
                hi_x = x;
                found = true;
                break;
            }
            prev_x = x;
            prev_h = hx;
        }
        if (!found) continue;
        const double tol = 1e-13 * m.r_max();
        for (int it = 0; it < 200 && hi_x - lo_x > tol; ++it) {
            const double mid = 0.5 * (lo_x + hi_x);
            if (H(mid) > 0.0)
                lo_x = mid;
            else
                hi_x = mid;
        }
        return 0.5 * (lo_x + hi_x);
    }
    return std::nullopt;
}

} // namespace detail

/// Lower/upper fixed points of the composed map when the fixed point of the
/// activity map is repelling (slope < -1); empty otherwise.
inline std::optional<std::pair<double, double>> period2_points(const RateModel& m,
                                                               const Grid& g) {
    if (!m.inhibitory())
        throw numeric_error("period2_points: requires an inhibitory model");
    const SteadyState ss = fixed_point_phi(m, g);
    const double slope = phi_prime(m, g, ss.I_bar);
    if (slope >= -1.0) return std::nullopt;
    const auto lower = detail::lowest_period2_root(m, g, ss.I_bar);
    if (!lower)
        throw numeric_error(
            "period2_points: repelling fixed point but no bracket found; refine the "
            "scan");
    return std::make_pair(*lower, phi(m, g, *lower));
}

inline MapAnalysis classify(const RateModel& m, const Grid& g) {
    MapAnalysis a;
    const SteadyState ss = fixed_point_phi(m, g);
    a.I_bar = ss.I_bar;
    a.residual = ss.residual;
    a.phi_prime_at_fp = phi_prime(m, g, ss.I_bar);
    if (a.phi_prime_at_fp < -1.0) {
        a.period2 = period2_points(m, g);
        if (a.period2) a.classification = MapClassification::Period2;
    }
    return a;
}

} // namespace elapse
