#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/quadrature.hpp>
#include <elapse/rate_model.hpp>

namespace elapse {

struct TraceRecord {
    double t = 0.0;
    double I = 0.0;
    double mass = 0.0;
    double dist_to_ref = std::numeric_limits<double>::quiet_NaN();
};

struct RunOptions {
    const Density* reference = nullptr; // trace records the L1 distance to it
    bool renormalize = false;           // rescale to unit mass after each step
};

struct RunResult {
    Density final;
    std::vector<TraceRecord> trace;
    std::vector<std::string> warnings;
};

/// Evaluates the firing-mass activity integral A(n, I) for varying I over a
/// fixed density. Threshold families get an O(1) evaluation from prefix sums;
/// other families pay one pass over the grid per call.
class ActivityIntegral {
public:
    ActivityIntegral(const RateModel& m, const Density& n) : m_(&m), n_(&n) {
        const Grid& g = n.grid;
        if (m.kind() == RateKind::Step || m.kind() == RateKind::TanhPhi) {
            threshold_ = true;
            f_lo_ = std::exp(-m.r_min() * g.dx);
            f_hi_ = std::exp(-(m.r_min() + 1.0) * g.dx);
            prefix_.resize(g.n_cells + 1);
            prefix_[0] = 0.0;
            for (std::size_t j = 0; j < g.n_cells; ++j)
                prefix_[j + 1] = prefix_[j] + n.values[j];
        }
    }

    double operator()(double I) const {
        const Grid& g = n_->grid;
        const auto& n = n_->values;
        if (threshold_) {
            const double sigma = *m_->threshold_age(I);
            const std::size_t N = g.n_cells;
            double a;
            double f_last;
            if (sigma <= 0.0) {
                a = (1.0 - f_hi_) * prefix_[N];
                f_last = f_hi_;
            } else if (sigma >= g.x_max()) {
                a = (1.0 - f_lo_) * prefix_[N];
                f_last = g.x_max() >= sigma ? f_hi_ : f_lo_;
            } else {
                auto mcell = static_cast<std::size_t>(sigma / g.dx);
                if (mcell >= N) mcell = N - 1;
                const double below = sigma - g.node(mcell);
                const double f_split = f_lo_ * std::exp(-(g.dx - below));
                a = (1.0 - f_lo_) * prefix_[mcell] + n[mcell] * (1.0 - f_split) +
                    (1.0 - f_hi_) * (prefix_[N] - prefix_[mcell + 1]);
                f_last = f_hi_;
            }
            return a + 0.5 * n[N] * (1.0 - f_last);
        }
        CellFactors cf;
        cf.fill(m_->at_activity(I), g);
        return activity_from_factors(n, cf);
    }

    /// The mass functional the transport step conserves when fed A(n, I) as
    /// inflow; used as a safe upper bracket scale.
    double inflow_mass() const {
        const auto& n = n_->values;
        double s = 0.5 * n.back();
        for (std::size_t j = 0; j + 1 < n.size(); ++j) s += n[j];
        return s * n_->grid.dx;
    }

private:
    const RateModel* m_;
    const Density* n_;
    bool threshold_ = false;
    double f_lo_ = 0.0, f_hi_ = 0.0;
    std::vector<double> prefix_;
};

/// Explicit activity with the rate argument frozen at J:
/// I = A(n, J), the discharge flux of one transport step.
inline double explicit_activity(const RateModel& m, const Density& n, double J) {
    return ActivityIntegral(m, n)(m.clamp_activity(J));
}

/// Implicit activity: the unique root of F(I) = I - A(n, I). Requires an
/// inhibitory model, which makes F strictly increasing.
inline double solve_activity(const RateModel& m, const Density& n,
                             double tol_rel = 1e-12) {
    if (!m.inhibitory())
        throw numeric_error("solve_activity: implicit activity requires inhibition");
    const ActivityIntegral A(m, n);
    const double tol = tol_rel * m.r_max();
    double lo = 0.0;
    double hi = m.r_max() * A.inflow_mass() + tol;
    double mid = 0.5 * (lo + hi);
    double F = mid - A(mid);
    for (int it = 0; it < 200 && std::fabs(F) > tol; ++it) {
        if (F > 0.0)
            hi = mid;
        else
            lo = mid;
        mid = 0.5 * (lo + hi);
        F = mid - A(mid);
    }
    if (std::fabs(F) > tol)
        throw numeric_error("solve_activity: bisection did not reach tolerance");
    return mid;
}

/// One semi-Lagrangian step (dt = dx): exact shift, exact cell decay with the
/// rate frozen at I_rate_arg, boundary node set to I_boundary, truncated tail
/// absorbed at the last node.
inline Density step(const RateModel& m, const Density& n, double I_boundary,
                    double I_rate_arg) {
    if (!n.nonnegative())
        throw invalid_argument_error("step: negative input density");
    CellFactors cf;
    cf.fill(m.at_activity(I_rate_arg), n.grid);
    Density out(n.grid);
    advance_with_factors(n.values, I_boundary, cf, out.values);
    return out;
}

namespace detail {

inline void record(std::vector<TraceRecord>& trace, double t, double I,
                   const Density& n, const Density* ref) {
    TraceRecord r;
    r.t = t;
    r.I = I;
    r.mass = n.mass();
    if (ref) {
        if (ref->grid != n.grid)
            throw invalid_argument_error("trace reference on a different grid");
        double s = 0.5 * (std::fabs(n.values.front() - ref->values.front()) +
                          std::fabs(n.values.back() - ref->values.back()));
        for (std::size_t j = 1; j + 1 < n.values.size(); ++j)
            s += std::fabs(n.values[j] - ref->values[j]);
        r.dist_to_ref = s * n.grid.dx;
    }
    trace.push_back(r);
}

} // namespace detail

/// Closed-loop run of the renewal equation: each step solves the implicit
/// activity and feeds it back as both boundary inflow and rate argument.
inline RunResult run_autonomous(const RateModel& m, Density n0, double T,
                                const RunOptions& opts = {}) {
    const Grid g = n0.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    RunResult res;
    res.trace.reserve(steps + 1);
    Density cur = std::move(n0);
    Density next(g);
    CellFactors cf;
    for (std::size_t k = 0;; ++k) {
        const double I = solve_activity(m, cur);
        detail::record(res.trace, static_cast<double>(k) * g.dt(), I, cur,
                       opts.reference);
        if (k == steps) break;
        cf.fill(m.at_activity(I), g);
        advance_with_factors(cur.values, I, cf, next.values);
        cur.values.swap(next.values);
        if (opts.renormalize) cur.normalize();
    }
    res.final = std::move(cur);
    return res;
}

/// Input-driven run: the rate argument is the prescribed J(t); the boundary
/// receives the explicit activity.
inline RunResult run_linear(const RateModel& m, Density n0,
                            const std::function<double(double)>& J, double T,
                            const RunOptions& opts = {}) {
    const Grid g = n0.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    RunResult res;
    res.trace.reserve(steps + 1);
    Density cur = std::move(n0);
    Density next(g);
    CellFactors cf;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * g.dt();
        const double Jt = m.clamp_activity(J(t));
        cf.fill(m.at_activity(Jt), g);
        const double I = activity_from_factors(cur.values, cf);
        detail::record(res.trace, t, I, cur, opts.reference);
        if (k == steps) break;
        advance_with_factors(cur.values, I, cf, next.values);
        cur.values.swap(next.values);
        if (opts.renormalize) cur.normalize();
    }
    res.final = std::move(cur);
    return res;
}

/// Initial regularity seminorm: trapezoid norm of the one-sided difference
/// quotient of n0 plus r(., I(0)) n0, with I(0) from the implicit solve.
inline double k_ini(const RateModel& m, const Density& n0) {
    const Grid& g = n0.grid;
    const double I0 = solve_activity(m, n0);
    const RateSlice s = m.at_activity(I0);
    const std::size_t N = g.n_cells;
    std::vector<double> integrand(g.n_nodes());
    for (std::size_t j = 0; j <= N; ++j) {
        const double d = j < N ? (n0.values[j + 1] - n0.values[j]) / g.dx
                               : (n0.values[N] - n0.values[N - 1]) / g.dx;
        integrand[j] = std::fabs(d + s(g.node(j)) * n0.values[j]);
    }
    double sum = 0.5 * (integrand.front() + integrand.back());
    for (std::size_t j = 1; j < N; ++j) sum += integrand[j];
    return sum * g.dx;
}

} // namespace elapse
