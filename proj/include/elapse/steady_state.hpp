#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/quadrature.hpp>
#include <elapse/rate_model.hpp>

namespace elapse {

/// R(x_j, I) at every node.
inline std::vector<double> cumulative_rate_profile(const RateModel& m, const Grid& g,
                                                   double I) {
    return cumulative_exponents(m.at_activity(I), g);
}

/// R(x, I) with x snapped to the nearest node.
inline double cumulative_rate(const RateModel& m, const Grid& g, double x, double I) {
    if (x < 0.0 || x > g.x_max() * (1.0 + 1e-12))
        throw invalid_argument_error("cumulative_rate: x outside [0, x_max]");
    auto j = static_cast<std::size_t>(std::llround(x / g.dx));
    if (j > g.n_cells) j = g.n_cells;
    // A full profile is overkill for one node but keeps one code path.
    return cumulative_exponents(m.at_activity(I), g)[j];
}

struct PhiResult {
    double value = 0.0;         // midpoint of the bracketed inverse integral
    double tail_halfwidth = 0.0; // half-width of the bracket, in units of phi
    double grid_integral = 0.0;
    double tail_survival = 0.0;  // e^{-R(x_max, I)}
};

/// Steady activity produced by the frozen input I:
///   phi = (integral of e^{-R(x,I)} dx)^{-1},
/// grid part by exact exponential cell integrals, tail bracketed between
/// e^{-R(x_max)}/r_max and e^{-R(x_max)}/r_min.
inline PhiResult phi_with_tail(const RateModel& m, const Grid& g, double I,
                               double tail_tol = 1e-8) {
    const double Ic = m.clamp_activity(I);
    const auto prof = survival_profile(m.at_activity(Ic), g);
    const double tail_surv = prof.survival.back();

    PhiResult r;
    r.grid_integral = prof.grid_integral;
    r.tail_survival = tail_surv;
    if (tail_surv == 0.0) {
        r.value = 1.0 / prof.grid_integral;
        r.tail_halfwidth = 0.0;
        return r;
    }
    if (!(m.r_min() > 0.0))
        throw numeric_error(
            "phi: tail not integrable from the stored bounds (r_min = 0); "
            "increase x_max");
    const double tail_lo = tail_surv / m.r_max();
    const double tail_hi = tail_surv / m.r_min();
    const double phi_hi = 1.0 / (prof.grid_integral + tail_lo);
    const double phi_lo = 1.0 / (prof.grid_integral + tail_hi);
    r.value = 1.0 / (prof.grid_integral + 0.5 * (tail_lo + tail_hi));
    r.tail_halfwidth = 0.5 * (phi_hi - phi_lo);
    if (r.tail_halfwidth > tail_tol)
        throw numeric_error("phi: tail bracket wider than tolerance; increase x_max");
    return r;
}

inline double phi(const RateModel& m, const Grid& g, double I) {
    return phi_with_tail(m, g, I).value;
}

/// Mass-one stationary profile for frozen input I: n(x) = phi(I) e^{-R(x,I)}.
inline Density stationary_density(const RateModel& m, const Grid& g, double I) {
    const double Ic = m.clamp_activity(I);
    const double p = phi_with_tail(m, g, Ic).value;
    const auto prof = survival_profile(m.at_activity(Ic), g);
    Density n(g);
    for (std::size_t j = 0; j < g.n_nodes(); ++j) n.values[j] = p * prof.survival[j];
    return n;
}

struct SteadyState {
    double I_bar = 0.0;
    Density density;
    double residual = 0.0;   // |phi(I_bar) - I_bar|
    double tail_bound = 0.0; // phi tail bracket half-width at I_bar
};

/// Unique fixed point of the activity map for inhibitory models, by bisection
/// on [0, r_max]. phi(0) > 0 and phi(r_max) <= r_max guarantee the bracket.
inline SteadyState fixed_point_phi(const RateModel& m, const Grid& g,
                                   double tol_rel = 1e-12) {
    if (!m.inhibitory())
        throw numeric_error(
            "fixed_point_phi: requires an inhibitory model (the activity map "
            "may have several fixed points otherwise)");
    const double tol = tol_rel * m.r_max();
    double lo = 0.0;
    double hi = m.r_max();
    double g_lo = phi(m, g, lo) - lo;
    if (g_lo < 0.0) throw numeric_error("fixed_point_phi: bracket failure at 0");
    double mid = hi;
    double g_mid = phi(m, g, hi) - hi;
    if (g_mid > tol) throw numeric_error("fixed_point_phi: bracket failure at r_max");
    for (int it = 0; it < 200 && std::fabs(g_mid) > tol; ++it) {
        mid = 0.5 * (lo + hi);
        g_mid = phi(m, g, mid) - mid;
        if (g_mid > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (std::fabs(g_mid) > tol)
        throw numeric_error("fixed_point_phi: bisection did not reach tolerance");

    SteadyState s;
    s.I_bar = mid;
    s.residual = std::fabs(g_mid);
    const auto pr = phi_with_tail(m, g, mid);
    s.tail_bound = pr.tail_halfwidth;
    s.density = stationary_density(m, g, mid);
    return s;
}

/// Stationary profile plus a mean-free bump vanishing at the origin. The bump
/// leaves the boundary value and the inflow-weighted mass untouched, so the
/// transport dynamics relaxes back to the unperturbed profile without a
/// first-order boundary offset. `amplitude` is the approximate L1 size of the
/// perturbation (halved as needed to keep the density nonnegative).
inline Density perturbed_stationary(const RateModel& m, const Grid& g,
                                    double amplitude) {
    Density n = fixed_point_phi(m, g).density;
    std::vector<double> bump(g.n_nodes());
    double mass_u = 0.0, mass_v = 0.0;
    for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        const double x = g.node(j);
        const double w = (j == 0 || j == g.n_cells) ? 0.5 : 1.0;
        mass_u += w * x * std::exp(-x);
        mass_v += w * x * x * std::exp(-0.8 * x);
    }
    const double alpha = mass_u / mass_v;
    double norm = 0.0;
    for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        const double x = g.node(j);
        bump[j] = x * std::exp(-x) - alpha * x * x * std::exp(-0.8 * x);
        norm += ((j == 0 || j == g.n_cells) ? 0.5 : 1.0) * std::fabs(bump[j]);
    }
    norm *= g.dx;
    double c = norm > 0.0 ? amplitude / norm : 0.0;
    for (int guard = 0; guard < 60; ++guard) {
        bool ok = true;
        for (std::size_t j = 0; j < g.n_nodes(); ++j)
            if (n.values[j] + c * bump[j] < 0.0) {
                ok = false;
                break;
            }
        if (ok) break;
        c *= 0.5;
    }
    for (std::size_t j = 0; j < g.n_nodes(); ++j) n.values[j] += c * bump[j];
    return n;
}

} // namespace elapse
