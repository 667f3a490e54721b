#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <elapse/diagnostics.hpp>
#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/solver.hpp>

namespace elapse {

/// Birth distribution on the grid. Mass is measured with the inflow-weighted
/// sum dx (B_0 + ... + B_{N-1} + B_N/2) — the functional the transport step
/// conserves when depositing dt * I * B — and is normalized to one at
/// construction. For smooth kernels vanishing at the origin this coincides
/// with the trapezoid integral to second order.
struct BirthKernel {
    Grid grid;
    std::vector<double> values;

    BirthKernel(const Grid& g, std::vector<double> v)
        : grid(g), values(std::move(v)) {
        if (values.size() != g.n_nodes())
            throw invalid_argument_error("BirthKernel: value count does not match grid");
        for (double b : values)
            if (!(b >= 0.0))
                throw invalid_argument_error("BirthKernel: values must be >= 0");
        const double m = inflow_mass();
        if (!(m > 0.0)) throw invalid_argument_error("BirthKernel: zero mass");
        for (double& b : values) b /= m;
    }

    double inflow_mass() const {
        double s = 0.5 * values.back();
        for (std::size_t j = 0; j + 1 < values.size(); ++j) s += values[j];
        return s * grid.dx;
    }

    /// Single-node surrogate of a boundary point mass: weight 1/dx at the
    /// origin, so one step deposits exactly the renewal boundary value.
    static BirthKernel delta_at_origin(const Grid& g) {
        std::vector<double> v(g.n_nodes(), 0.0);
        v[0] = 1.0 / g.dx;
        return BirthKernel(g, std::move(v));
    }

    template <typename F>
    static BirthKernel project(const Grid& g, F&& f) {
        std::vector<double> v(g.n_nodes());
        for (std::size_t j = 0; j < g.n_nodes(); ++j) v[j] = f(g.node(j));
        return BirthKernel(g, std::move(v));
    }
};

struct DistributedStep {
    Density density;
    double activity = 0.0;
};

/// Distributed-birth step: implicit activity, transport-decay with zero
/// boundary inflow, then the source dt * I * B deposited after transport
/// (first-order splitting, keeps the density nonnegative).
inline DistributedStep step_distributed(const RateModel& m, const BirthKernel& B,
                                        const Density& n) {
    if (B.grid != n.grid)
        throw invalid_argument_error("step_distributed: kernel grid mismatch");
    if (!n.nonnegative())
        throw invalid_argument_error("step_distributed: negative input density");
    DistributedStep out;
    out.activity = solve_activity(m, n);
    CellFactors cf;
    cf.fill(m.at_activity(out.activity), n.grid);
    out.density = Density(n.grid);
    advance_with_factors(n.values, 0.0, cf, out.density.values);
    const double dose = n.grid.dt() * out.activity;
    for (std::size_t j = 0; j < n.grid.n_nodes(); ++j)
        out.density.values[j] += dose * B.values[j];
    return out;
}

inline RunResult run_distributed(const RateModel& m, const BirthKernel& B, Density n0,
                                 double T, const RunOptions& opts = {}) {
    const Grid g = n0.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    RunResult res;
    res.trace.reserve(steps + 1);
    Density cur = std::move(n0);
    for (std::size_t k = 0;; ++k) {
        const double I = solve_activity(m, cur);
        detail::record(res.trace, static_cast<double>(k) * g.dt(), I, cur,
                       opts.reference);
        if (k == steps) break;
        cur = step_distributed(m, B, cur).density;
    }
    res.final = std::move(cur);
    return res;
}

/// Two populations with distributed birth, cross-coupled: population i is
/// fed by the activity of population j.
struct SystemState {
    Density n1;
    Density n2;
};

struct SystemStep {
    SystemState state;
    double I1 = 0.0;
    double I2 = 0.0;
};

inline SystemStep step_system(const RateModel& m1, const RateModel& m2,
                              const BirthKernel& B1, const BirthKernel& B2,
                              const SystemState& s) {
    if (s.n1.grid != s.n2.grid)
        throw invalid_argument_error("step_system: grid mismatch");
    const Grid& g = s.n1.grid;
    SystemStep out;
    out.I1 = solve_activity(m1, s.n1);
    out.I2 = solve_activity(m2, s.n2);
    CellFactors cf;
    out.state.n1 = Density(g);
    out.state.n2 = Density(g);
    cf.fill(m1.at_activity(out.I1), g);
    advance_with_factors(s.n1.values, 0.0, cf, out.state.n1.values);
    cf.fill(m2.at_activity(out.I2), g);
    advance_with_factors(s.n2.values, 0.0, cf, out.state.n2.values);
    const double dt = g.dt();
    for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        out.state.n1.values[j] += dt * out.I2 * B1.values[j]; // cross-coupling
        out.state.n2.values[j] += dt * out.I1 * B2.values[j];
    }
    return out;
}

struct SystemTraceRecord {
    double t = 0.0;
    double I1 = 0.0, I2 = 0.0;
    double mass1 = 0.0, mass2 = 0.0;
};

struct SystemRunResult {
    SystemState final;
    std::vector<SystemTraceRecord> trace;
};

inline SystemRunResult run_system(const RateModel& m1, const RateModel& m2,
                                  const BirthKernel& B1, const BirthKernel& B2,
                                  SystemState s0, double T) {
    const Grid g = s0.n1.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    SystemRunResult res;
    res.trace.reserve(steps + 1);
    SystemState cur = std::move(s0);
    for (std::size_t k = 0;; ++k) {
        SystemTraceRecord rec;
        rec.t = static_cast<double>(k) * g.dt();
        rec.I1 = solve_activity(m1, cur.n1);
        rec.I2 = solve_activity(m2, cur.n2);
        rec.mass1 = cur.n1.mass();
        rec.mass2 = cur.n2.mass();
        res.trace.push_back(rec);
        if (k == steps) break;
        cur = step_system(m1, m2, B1, B2, cur).state;
    }
    res.final = std::move(cur);
    return res;
}

/// Distance trace and dissipation defects for two distributed-birth runs on
/// one clock.
inline ContractionReport nonexpansion_report_distributed(const RateModel& m,
                                                         const BirthKernel& B,
                                                         const Density& n0_a,
                                                         const Density& n0_b,
                                                         double T) {
    if (n0_a.grid != n0_b.grid)
        throw invalid_argument_error("nonexpansion report: grid mismatch");
    const Grid g = n0_a.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    ContractionReport rep;
    Density a = n0_a, b = n0_b;
    for (std::size_t k = 0;; ++k) {
        const double Ia = solve_activity(m, a);
        const double Ib = solve_activity(m, b);
        rep.times.push_back(static_cast<double>(k) * g.dt());
        rep.distances.push_back(l1_distance(a, b));
        rep.g_values.push_back(g_functional(m, a, b, Ia, Ib));
        if (k == steps) break;
        a = step_distributed(m, B, a).density;
        b = step_distributed(m, B, b).density;
    }
    rep.finish(g.dt());
    return rep;
}

/// Same for two copies of the cross-coupled system: the distance is the sum
/// of the per-population L1 distances, the dissipation the sum of the two
/// functionals.
inline ContractionReport nonexpansion_report_system(
    const RateModel& m1, const RateModel& m2, const BirthKernel& B1,
    const BirthKernel& B2, const SystemState& a0, const SystemState& b0, double T) {
    const Grid g = a0.n1.grid;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    ContractionReport rep;
    SystemState a = a0, b = b0;
    for (std::size_t k = 0;; ++k) {
        const double Ia1 = solve_activity(m1, a.n1);
        const double Ia2 = solve_activity(m2, a.n2);
        const double Ib1 = solve_activity(m1, b.n1);
        const double Ib2 = solve_activity(m2, b.n2);
        rep.times.push_back(static_cast<double>(k) * g.dt());
        rep.distances.push_back(l1_distance(a.n1, b.n1) + l1_distance(a.n2, b.n2));
        rep.g_values.push_back(g_functional(m1, a.n1, b.n1, Ia1, Ib1) +
                               g_functional(m2, a.n2, b.n2, Ia2, Ib2));
        if (k == steps) break;
        a = step_system(m1, m2, B1, B2, a).state;
        b = step_system(m1, m2, B1, B2, b).state;
    }
    rep.finish(g.dt());
    return rep;
}

} // namespace elapse
