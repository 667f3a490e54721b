#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/rate_model.hpp>
#include <elapse/solver.hpp>

namespace elapse {

inline double sg(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Trapezoid integral of |a - b|.
inline double l1_distance(const Density& a, const Density& b) {
    if (a.grid != b.grid)
        throw invalid_argument_error("l1_distance: grid mismatch");
    double s = 0.5 * (std::fabs(a.values.front() - b.values.front()) +
                      std::fabs(a.values.back() - b.values.back()));
    for (std::size_t j = 1; j + 1 < a.values.size(); ++j)
        s += std::fabs(a.values[j] - b.values[j]);
    return s * a.grid.dx;
}

/// Dissipation functional of a solution pair:
///   integral of [r1 |n1-n2| + |r1-r2| n2] [1 - sg(n1-n2) sg(I1-I2)] dx,
/// trapezoid rule, sg(0) = 0. Nonnegative by construction.
inline double g_functional(const RateModel& m, const Density& n1, const Density& n2,
                           double I1, double I2) {
    if (n1.grid != n2.grid)
        throw invalid_argument_error("g_functional: grid mismatch");
    const Grid& g = n1.grid;
    const RateSlice r1 = m.at_activity(I1);
    const RateSlice r2 = m.at_activity(I2);
    const double sI = sg(I1 - I2);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        const double x = g.node(j);
        const double d = n1.values[j] - n2.values[j];
        const double v1 = r1(x);
        const double core = v1 * std::fabs(d) + std::fabs(v1 - r2(x)) * n2.values[j];
        const double w = (j == 0 || j == g.n_cells) ? 0.5 : 1.0;
        sum += w * core * (1.0 - sg(d) * sI);
    }
    return sum * g.dx;
}

struct ContractionReport {
    std::vector<double> times;
    std::vector<double> distances;
    std::vector<double> g_values;
    /// defects[k] = (dist_{k+1} - dist_k)/dt + G_k, one per step.
    std::vector<double> defects;
    double max_violation = 0.0; // largest per-step increase of the distance

    void finish(double dt) {
        defects.clear();
        max_violation = 0.0;
        for (std::size_t k = 0; k + 1 < distances.size(); ++k) {
            const double delta = distances[k + 1] - distances[k];
            defects.push_back(delta / dt + g_values[k]);
            if (delta > max_violation) max_violation = delta;
        }
    }
};

/// Two closed-loop runs on one clock; reports the distance trace, the
/// dissipation functional and the discrete defect per step.
inline ContractionReport contraction_test(const RateModel& m, const Density& n0_a,
                                          const Density& n0_b, double T) {
    if (n0_a.grid != n0_b.grid)
        throw invalid_argument_error("contraction_test: grid mismatch");
    const Grid g = n0_a.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    ContractionReport rep;
    Density a = n0_a, b = n0_b;
    Density buf(g);
    CellFactors cf;
    for (std::size_t k = 0;; ++k) {
        const double Ia = solve_activity(m, a);
        const double Ib = solve_activity(m, b);
        rep.times.push_back(static_cast<double>(k) * g.dt());
        rep.distances.push_back(l1_distance(a, b));
        rep.g_values.push_back(g_functional(m, a, b, Ia, Ib));
        if (k == steps) break;
        cf.fill(m.at_activity(Ia), g);
        advance_with_factors(a.values, Ia, cf, buf.values);
        a.values.swap(buf.values);
        cf.fill(m.at_activity(Ib), g);
        advance_with_factors(b.values, Ib, cf, buf.values);
        b.values.swap(buf.values);
    }
    rep.finish(g.dt());
    return rep;
}

/// Least-squares exponential rate of a positive decaying trace. Fits
/// log(values) against time over the decay window: from the first sample
/// below half the initial value (or the whole trace if it never gets there)
/// down to 1e-10.
inline double decay_rate(const std::vector<double>& times,
                         const std::vector<double>& values) {
    if (times.size() != values.size())
        throw invalid_argument_error("decay_rate: size mismatch");
    std::size_t above = 0;
    for (double v : values)
        if (v > 1e-13) ++above;
    if (above < 10)
        throw numeric_error("decay_rate: fewer than 10 samples above 1e-13");

    const double v0 = values.front();
    std::size_t start = 0;
    bool entered = false;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] <= 0.5 * v0) {
            start = k;
            entered = true;
            break;
        }
    }
    if (!entered) start = 0;

    double st = 0, sv = 0, stt = 0, stv = 0;
    std::size_t count = 0;
    for (std::size_t k = start; k < values.size(); ++k) {
        if (values[k] < 1e-10) break;
        if (entered && values[k] > 0.5 * v0) continue;
        const double lt = times[k];
        const double lv = std::log(values[k]);
        st += lt;
        sv += lv;
        stt += lt * lt;
        stv += lt * lv;
        ++count;
    }
    if (count < 2) throw numeric_error("decay_rate: no decay regime in the window");
    const double denom = static_cast<double>(count) * stt - st * st;
    if (denom == 0.0) throw numeric_error("decay_rate: degenerate time samples");
    const double slope = (static_cast<double>(count) * stv - st * sv) / denom;
    return -slope;
}

} // namespace elapse
