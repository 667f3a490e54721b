#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <elapse/grid.hpp>
#include <elapse/rate_model.hpp>

namespace elapse {

/// Exact integral of e^{-r s} over [0, h].
inline double decaying_cell_integral(double r, double h) {
    return r > 0.0 ? -std::expm1(-r * h) / r : h;
}

/// Integral of the rate over one cell [x_j, x_j + h]. Threshold slices are
/// split at the jump, so the result is exact for piecewise-constant rates;
/// for tabulated rates the midpoint value is used (second order).
inline double cell_rate_integral(const RateSlice& s, double x_left, double h) {
    switch (s.tag) {
        case RateSlice::Tag::Flat:
            return s.base * h;
        case RateSlice::Tag::Threshold: {
            if (s.jump_x <= x_left) return (s.base + 1.0) * h;
            if (s.jump_x >= x_left + h) return s.base * h;
            const double below = s.jump_x - x_left;
            return s.base * h + (h - below);
        }
        case RateSlice::Tag::Table:
            return s(x_left + 0.5 * h) * h;
    }
    return 0.0;
}

/// Survival factors across one transport step (dt = dx): f[j] multiplies the
/// value moving from node j to node j+1, and last_node carries the absorbed
/// tail with the point rate at x_max.
struct CellFactors {
    std::vector<double> f;
    double last_node = 1.0;

    void fill(const RateSlice& s, const Grid& g) {
        f.resize(g.n_cells);
        const double h = g.dx;
        switch (s.tag) {
            case RateSlice::Tag::Flat: {
                const double v = std::exp(-s.base * h);
                std::fill(f.begin(), f.end(), v);
                last_node = v;
                break;
            }
            case RateSlice::Tag::Threshold: {
                const double f_lo = std::exp(-s.base * h);
                const double f_hi = std::exp(-(s.base + 1.0) * h);
                const double sigma = s.jump_x;
                if (sigma <= 0.0) {
                    std::fill(f.begin(), f.end(), f_hi);
                } else if (sigma >= g.x_max()) {
                    std::fill(f.begin(), f.end(), f_lo);
                } else {
                    const auto m = static_cast<std::size_t>(sigma / h);
                    const std::size_t mm = m < g.n_cells ? m : g.n_cells - 1;
                    std::fill(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(mm), f_lo);
                    std::fill(f.begin() + static_cast<std::ptrdiff_t>(mm) + 1, f.end(), f_hi);
                    const double below = sigma - g.node(mm);
                    f[mm] = f_lo * std::exp(-(h - below));
                }
                last_node = g.x_max() >= sigma ? f_hi : f_lo;
                break;
            }
            case RateSlice::Tag::Table: {
                for (std::size_t j = 0; j < g.n_cells; ++j)
                    f[j] = std::exp(-s(g.midpoint(j)) * h);
                last_node = std::exp(-s(g.x_max()) * h);
                break;
            }
        }
    }
};

/// Firing-mass activity integral: the mass discharged per unit time when the
/// density n is transported one step with the given factors,
///   A(n) = sum_j n_j (1 - f_j) / dt * dx + half-weighted last node.
/// With dt = dx this is a second-order quadrature of the rate-weighted
/// integral of n, and using it as the boundary inflow makes the transport
/// step conserve the inflow-weighted mass exactly.
inline double activity_from_factors(const std::vector<double>& n, const CellFactors& cf) {
    double a = 0.0;
    for (std::size_t j = 0; j < cf.f.size(); ++j) a += n[j] * (1.0 - cf.f[j]);
    a += 0.5 * n[cf.f.size()] * (1.0 - cf.last_node);
    return a;
}

/// One transport-decay step: shift by one node, decay by the cell factor,
/// inject the boundary value, absorb the truncated tail at the last node.
inline void advance_with_factors(const std::vector<double>& in, double boundary,
                                 const CellFactors& cf, std::vector<double>& out) {
    const std::size_t n_cells = cf.f.size();
    out.resize(in.size());
    out[0] = boundary;
    for (std::size_t j = 1; j < n_cells; ++j) out[j] = in[j - 1] * cf.f[j - 1];
    out[n_cells] = in[n_cells - 1] * cf.f[n_cells - 1] + in[n_cells] * cf.last_node;
}

/// Node values of e^{-R(x_j)} together with the exact grid integral of the
/// survival function. Cell contributions use the same split rule as
/// cell_rate_integral, so threshold rates are integrated exactly.
struct SurvivalProfile {
    std::vector<double> survival;
    double grid_integral = 0.0;
};

inline SurvivalProfile survival_profile(const RateSlice& s, const Grid& g) {
    SurvivalProfile p;
    p.survival.resize(g.n_nodes());
    p.survival[0] = 1.0;
    const double h = g.dx;
    double integral = 0.0;
    for (std::size_t j = 0; j < g.n_cells; ++j) {
        const double e = p.survival[j];
        const double x = g.node(j);
        double cell;
        double a;
        if (s.tag == RateSlice::Tag::Threshold && s.jump_x > x && s.jump_x < x + h) {
            const double below = s.jump_x - x;
            const double r_lo = s.base;
            const double r_hi = s.base + 1.0;
            cell = e * (decaying_cell_integral(r_lo, below) +
                        std::exp(-r_lo * below) *
                            decaying_cell_integral(r_hi, h - below));
            a = r_lo * below + r_hi * (h - below);
        } else {
            double r;
            switch (s.tag) {
                case RateSlice::Tag::Flat: r = s.base; break;
                case RateSlice::Tag::Threshold:
                    r = s.jump_x <= x ? s.base + 1.0 : s.base;
                    break;
                default: r = s(x + 0.5 * h); break;
            }
            cell = e * decaying_cell_integral(r, h);
            a = r * h;
        }
        integral += cell;
        p.survival[j + 1] = e * std::exp(-a);
    }
    p.grid_integral = integral;
    return p;
}

/// Cumulative rate exponents R(x_j) = integral of r up to each node, using
/// the exact cell rule above.
inline std::vector<double> cumulative_exponents(const RateSlice& s, const Grid& g) {
    std::vector<double> R(g.n_nodes());
    R[0] = 0.0;
    for (std::size_t j = 0; j < g.n_cells; ++j)
        R[j + 1] = R[j] + cell_rate_integral(s, g.node(j), g.dx);
    return R;
}

} // namespace elapse
