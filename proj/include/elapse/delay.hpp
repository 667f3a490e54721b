#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <elapse/diagnostics.hpp>
#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/solver.hpp>
#include <elapse/steady_state.hpp>

namespace elapse {

/// Ring buffer of activity values covering [t - d, t).
class ActivityHistory {
public:
    ActivityHistory(std::size_t steps_per_delay, double I_ini)
        : buf_(steps_per_delay, I_ini) {
        if (steps_per_delay == 0)
            throw invalid_argument_error("ActivityHistory: delay shorter than one step");
    }

    double oldest() const { return buf_[head_]; }
    void push(double I) {
        buf_[head_] = I;
        head_ = (head_ + 1) % buf_.size();
    }
    std::size_t size() const { return buf_.size(); }

private:
    std::vector<double> buf_;
    std::size_t head_ = 0;
};

/// Forward orbit of the activity map together with the matching stationary
/// profiles: iterates[k] is the k-th image of I_ini; on the rescaled interval
/// tau in [k, k+1) the limiting activity is iterates[k+1] and the limiting
/// density is the stationary profile of iterates[k].
struct LimitProfile {
    std::vector<double> iterates;
    std::vector<Density> densities;

    double activity_at(double tau) const {
        if (tau < 0.0) return iterates.front();
        auto k = static_cast<std::size_t>(tau) + 1;
        if (k >= iterates.size()) k = iterates.size() - 1;
        return iterates[k];
    }
    const Density& density_at(double tau) const {
        auto k = tau < 0.0 ? 0 : static_cast<std::size_t>(tau);
        if (k >= densities.size()) k = densities.size() - 1;
        return densities[k];
    }
};

inline LimitProfile limit_profile(const RateModel& m, const Grid& g, double I_ini,
                                  std::size_t n_intervals) {
    if (n_intervals < 1)
        throw invalid_argument_error("limit_profile: need at least one interval");
    LimitProfile p;
    p.iterates.resize(n_intervals + 1);
    p.iterates[0] = m.clamp_activity(I_ini);
    for (std::size_t k = 1; k <= n_intervals; ++k)
        p.iterates[k] = phi(m, g, p.iterates[k - 1]);
    p.densities.reserve(n_intervals);
    for (std::size_t k = 0; k < n_intervals; ++k)
        p.densities.push_back(stationary_density(m, g, p.iterates[k]));
    return p;
}

struct DelayedRunOptions {
    /// When set, the trace distance column tracks the limiting profile of the
    /// current rescaled interval.
    const LimitProfile* profile = nullptr;
};

struct DelayedRunResult {
    Density final;
    std::vector<TraceRecord> trace;
    double actual_delay = 0.0; // d snapped to a step multiple
    std::vector<std::string> warnings;
};

/// Delayed closed loop: the rate argument is the recorded activity one delay
/// ago; the history is primed with I_ini on [-d, 0).
inline DelayedRunResult run_delayed(const RateModel& m, Density n0, double I_ini,
                                    double d, double T,
                                    const DelayedRunOptions& opts = {}) {
    const Grid g = n0.grid;
    if (!(d > 0.0)) throw invalid_argument_error("run_delayed: delay must be > 0");
    if (I_ini < 0.0 || I_ini > m.r_max())
        throw invalid_argument_error("run_delayed: I_ini outside [0, r_max]");

    auto steps_per_delay = static_cast<std::size_t>(std::llround(d / g.dt()));
    if (steps_per_delay == 0) steps_per_delay = 1;
    DelayedRunResult res;
    res.actual_delay = static_cast<double>(steps_per_delay) * g.dt();
    if (std::fabs(res.actual_delay - d) > 1e-6 * d)
        res.warnings.push_back("delay snapped to " + std::to_string(res.actual_delay));

    ActivityHistory hist(steps_per_delay, I_ini);
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    res.trace.reserve(steps + 1);
    Density cur = std::move(n0);
    Density next(g);
    CellFactors cf;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * g.dt();
        const double J = hist.oldest();
        cf.fill(m.at_activity(J), g);
        const double I = activity_from_factors(cur.values, cf);
        const Density* ref =
            opts.profile ? &opts.profile->density_at(t / res.actual_delay) : nullptr;
        detail::record(res.trace, t, I, cur, ref);
        if (k == steps) break;
        advance_with_factors(cur.values, I, cf, next.values);
        cur.values.swap(next.values);
        hist.push(I);
    }
    res.final = std::move(cur);
    return res;
}

struct CesaroError {
    double activity_error = 0.0;
    std::optional<double> density_error;
};

/// Rescaled-time L1 error between a delayed trace and the limiting profile:
///   integral over [0, N] of |I_d(tau) - I_inf(tau)| d tau
/// by left-endpoint step sums (the trace is piecewise constant per step).
/// The density version is included when the trace recorded distances.
inline CesaroError cesaro_error(const std::vector<TraceRecord>& trace,
                                const LimitProfile& profile, double d,
                                std::size_t n_intervals) {
    if (trace.size() < 2) throw numeric_error("cesaro_error: trace too short");
    const double dt = trace[1].t - trace[0].t;
    const double horizon = static_cast<double>(n_intervals) * d;
    if (trace.back().t < horizon - 0.5 * dt)
        throw numeric_error("cesaro_error: trace does not cover the horizon");
    if (n_intervals + 1 > profile.iterates.size())
        throw invalid_argument_error("cesaro_error: profile has too few intervals");

    CesaroError err;
    double dens = 0.0;
    bool have_dens = true;
    for (const auto& rec : trace) {
        if (rec.t >= horizon - 0.5 * dt) break;
        const double tau = rec.t / d;
        err.activity_error += std::fabs(rec.I - profile.activity_at(tau)) * dt / d;
        if (std::isnan(rec.dist_to_ref))
            have_dens = false;
        else if (have_dens)
            dens += rec.dist_to_ref * dt / d;
    }
    if (have_dens) err.density_error = dens;
    return err;
}

struct IterateBounds {
    /// activity_bounds[k] bounds the weighted sup distance of the activity to
    /// the (k+1)-th iterate on the (k+1)-th delay window, k = 0..N-1.
    std::vector<double> activity_bounds;
    std::vector<double> density_bounds;

    double bound_sum() const {
        double s = 0.0;
        for (double c : activity_bounds) s += c;
        return s;
    }
};

/// Window-wise convergence-constant recursion:
///   C_0 = 0,  C_{k+1} = 2 r_max + gamma_bar (2 r_max / |r_min - alpha| + 1) C_k,
///   D_{k+1} = 2 + 2 gamma_bar C_k / |r_min - alpha|.
inline IterateBounds iterate_error_bound(double gamma_bar, double r_max, double r_min,
                                         double alpha, std::size_t n_intervals) {
    if (!(alpha > 0.0) || !(alpha < r_min))
        throw invalid_argument_error("iterate_error_bound: need 0 < alpha < r_min");
    IterateBounds b;
    double c = 0.0;
    for (std::size_t k = 0; k < n_intervals; ++k) {
        b.density_bounds.push_back(2.0 + 2.0 * gamma_bar * c / std::fabs(r_min - alpha));
        c = 2.0 * r_max + gamma_bar * (2.0 * r_max / std::fabs(r_min - alpha) + 1.0) * c;
        b.activity_bounds.push_back(c);
    }
    return b;
}

struct WeakNonlinearity {
    double omega = 0.0;
    bool converges = false;
    double x0 = 0.0;
    double r_min = 0.0;

    /// Guaranteed decay rate for delay d (meaningful when omega < 1).
    double rate(double d) const {
        if (omega <= 0.0) return r_min;
        if (omega >= 1.0) return 0.0;
        return std::fabs(std::log(omega)) / (d + x0);
    }
};

/// Smallness check for the activity feedback: omega = gamma_bar (3 r_max /
/// r_min + 1); omega < 1 guarantees convergence for every delay.
inline WeakNonlinearity weak_nl_check(const RateModel& m) {
    if (!m.strictly_excitable() || !m.inhibitory())
        throw invalid_argument_error(
            "weak_nl_check: needs a strictly excitable inhibitory model");
    WeakNonlinearity w;
    w.r_min = m.r_min();
    w.omega = m.gamma_bar() * (3.0 * m.r_max() / m.r_min() + 1.0);
    w.converges = w.omega < 1.0;
    w.x0 = m.gamma_bar() > 0.0
               ? std::log(m.r_min() / (m.gamma_bar() * m.r_max())) / m.r_min()
               : std::numeric_limits<double>::infinity();
    return w;
}

} // namespace elapse
