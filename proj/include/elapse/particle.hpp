#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <elapse/errors.hpp>
#include <elapse/grid.hpp>
#include <elapse/rate_model.hpp>
#include <elapse/solver.hpp>

namespace elapse {

/// Interacting-particle ensemble for the age-dependent hazard process. Ages
/// are kept sorted ascending (stepping preserves the order: fired particles
/// re-enter at zero, survivors shift uniformly), which makes empirical
/// threshold counts a binary search.
class ParticleEnsemble {
public:
    ParticleEnsemble(std::size_t n, std::uint64_t seed)
        : ages_(n, 0.0), seed_(seed), rng_(seed) {
        if (n == 0) throw invalid_argument_error("ParticleEnsemble: need n >= 1");
    }

    static ParticleEnsemble from_density(const Density& n, std::size_t count,
                                         std::uint64_t seed) {
        ParticleEnsemble e(count, seed);
        const Grid& g = n.grid;
        // Cell masses of the piecewise-linear density, then a linear-density
        // inverse CDF within the chosen cell.
        std::vector<double> cum(g.n_cells + 1, 0.0);
        for (std::size_t j = 0; j < g.n_cells; ++j)
            cum[j + 1] = cum[j] + 0.5 * (n.values[j] + n.values[j + 1]) * g.dx;
        const double total = cum.back();
        if (!(total > 0.0))
            throw invalid_argument_error("ParticleEnsemble: density has no mass");
        for (std::size_t i = 0; i < count; ++i) {
            const double u = e.uniform() * total;
            const auto it = std::upper_bound(cum.begin(), cum.end(), u);
            std::size_t j = it == cum.begin()
                                ? 0
                                : static_cast<std::size_t>(it - cum.begin()) - 1;
            if (j >= g.n_cells) j = g.n_cells - 1;
            const double a = n.values[j];
            const double b = n.values[j + 1];
            const double cell_mass = cum[j + 1] - cum[j];
            const double frac = cell_mass > 0.0 ? (u - cum[j]) / cell_mass : 0.0;
            double xi;
            if (std::fabs(b - a) < 1e-14 * (a + b + 1e-300)) {
                xi = frac;
            } else {
                // Invert (a xi + (b-a) xi^2 / 2) / ((a+b)/2) = frac.
                const double disc = a * a + (b * b - a * a) * frac;
                xi = (std::sqrt(std::max(disc, 0.0)) - a) / (b - a);
            }
            e.ages_[i] = g.node(j) + std::clamp(xi, 0.0, 1.0) * g.dx;
        }
        std::sort(e.ages_.begin(), e.ages_.end());
        return e;
    }

    const std::vector<double>& ages() const { return ages_; }
    std::size_t size() const { return ages_.size(); }
    std::uint64_t seed() const { return seed_; }

    double uniform() {
        return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }

    /// Mean rate over the ensemble with the activity argument frozen —
    /// the empirical counterpart of the explicit activity.
    double mean_rate(const RateModel& m, double I_arg) const {
        const RateSlice s = m.at_activity(I_arg);
        if (s.has_threshold()) {
            const auto it =
                std::lower_bound(ages_.begin(), ages_.end(), s.jump_x);
            const auto above = static_cast<double>(ages_.end() - it);
            return s.base + above / static_cast<double>(ages_.size());
        }
        double sum = 0.0;
        for (double a : ages_) sum += s(a);
        return sum / static_cast<double>(ages_.size());
    }

    /// Root of I = mean_rate(I), the empirical implicit activity. Mirrors the
    /// grid solver's bisection; requires inhibition.
    double implicit_activity(const RateModel& m, double tol_rel = 1e-12) const {
        if (!m.inhibitory())
            throw numeric_error(
                "implicit_activity: implicit activity requires inhibition");
        const double tol = tol_rel * m.r_max();
        double lo = 0.0, hi = m.r_max();
        double mid = 0.5 * (lo + hi);
        double F = mid - mean_rate(m, mid);
        for (int it = 0; it < 200 && std::fabs(F) > tol; ++it) {
            if (F > 0.0)
                hi = mid;
            else
                lo = mid;
            mid = 0.5 * (lo + hi);
            F = mid - mean_rate(m, mid);
        }
        return mid;
    }

    /// One Bernoulli step: each particle fires with probability
    /// 1 - exp(-r(age, I_arg) dt), firing resets the age, survivors age by dt.
    /// Returns fired / (n dt), the realized discharge flux.
    double bernoulli_step(const RateModel& m, double I_arg, double dt) {
        const RateSlice s = m.at_activity(I_arg);
        double p_lo = 0.0, p_hi = 0.0;
        const bool thresh = s.has_threshold();
        if (thresh) {
            p_lo = -std::expm1(-s.base * dt);
            p_hi = -std::expm1(-(s.base + 1.0) * dt);
        }
        scratch_.clear();
        scratch_.reserve(ages_.size());
        std::size_t fired = 0;
        for (double age : ages_) {
            const double p = thresh ? (age >= s.jump_x ? p_hi : p_lo)
                                    : -std::expm1(-s(age) * dt);
            if (uniform() < p)
                ++fired;
            else
                scratch_.push_back(age + dt);
        }
        std::fill(ages_.begin(), ages_.begin() + static_cast<std::ptrdiff_t>(fired),
                  0.0);
        std::copy(scratch_.begin(), scratch_.end(),
                  ages_.begin() + static_cast<std::ptrdiff_t>(fired));
        return static_cast<double>(fired) / (static_cast<double>(ages_.size()) * dt);
    }

    /// Cell-count histogram on the grid, normalized to a density; ages beyond
    /// x_max land in the last cell.
    std::vector<double> histogram(const Grid& g) const {
        std::vector<double> h(g.n_cells, 0.0);
        for (double a : ages_) {
            auto j = static_cast<std::size_t>(a / g.dx);
            if (j >= g.n_cells) j = g.n_cells - 1;
            h[j] += 1.0;
        }
        const double norm = 1.0 / (static_cast<double>(ages_.size()) * g.dx);
        for (double& v : h) v *= norm;
        return h;
    }

private:
    std::vector<double> ages_;
    std::uint64_t seed_ = 0;
    std::mt19937_64 rng_;
    std::vector<double> scratch_;
};

/// L1 distance between a cell histogram and the cell averages of a grid
/// density.
inline double histogram_l1_distance(const std::vector<double>& hist,
                                    const Density& n) {
    if (hist.size() != n.grid.n_cells)
        throw invalid_argument_error("histogram_l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < hist.size(); ++j)
        s += std::fabs(hist[j] - 0.5 * (n.values[j] + n.values[j + 1]));
    return s * n.grid.dx;
}

struct McMode {
    enum class Kind { Autonomous, Delayed } kind = Kind::Autonomous;
    double delay = 0.0;
    double I_ini = 0.0;

    static McMode autonomous() { return {}; }
    static McMode delayed(double d, double I_ini) {
        McMode m;
        m.kind = Kind::Delayed;
        m.delay = d;
        m.I_ini = I_ini;
        return m;
    }
};

struct McRunResult {
    std::vector<TraceRecord> trace; // I = empirical intensity before the step
    std::vector<double> fired;      // realized discharge flux per step
    std::vector<double> histogram;  // final age histogram on the grid cells
    std::vector<std::string> warnings;
};

/// Particle run of the same closed loops as the grid solver. The recorded
/// activity is the empirical intensity; the realized fired fractions are kept
/// alongside.
inline McRunResult mc_run(const RateModel& m, const Grid& g, ParticleEnsemble& ens,
                          double T, double dt, const McMode& mode) {
    if (!(dt > 0.0)) throw invalid_argument_error("mc_run: dt must be > 0");
    McRunResult res;
    if (m.r_max() * dt > 0.2)
        res.warnings.push_back("mc_run: r_max * dt > 0.2, firing probabilities coarse");
    const auto steps = static_cast<std::size_t>(std::llround(T / dt));
    res.trace.reserve(steps + 1);
    res.fired.reserve(steps);

    std::vector<double> ring;
    std::size_t head = 0;
    if (mode.kind == McMode::Kind::Delayed) {
        auto lag = static_cast<std::size_t>(std::llround(mode.delay / dt));
        if (lag == 0) lag = 1;
        if (mode.I_ini < 0.0 || mode.I_ini > m.r_max())
            throw invalid_argument_error("mc_run: I_ini outside [0, r_max]");
        ring.assign(lag, mode.I_ini);
    }

    for (std::size_t k = 0;; ++k) {
        double I_arg;
        double intensity;
        if (mode.kind == McMode::Kind::Autonomous) {
            intensity = ens.implicit_activity(m);
            I_arg = intensity;
        } else {
            I_arg = ring[head];
            intensity = ens.mean_rate(m, I_arg);
        }
        TraceRecord rec;
        rec.t = static_cast<double>(k) * dt;
        rec.I = intensity;
        rec.mass = 1.0;
        res.trace.push_back(rec);
        if (k == steps) break;
        res.fired.push_back(ens.bernoulli_step(m, I_arg, dt));
        if (mode.kind == McMode::Kind::Delayed) {
            ring[head] = intensity;
            head = (head + 1) % ring.size();
        }
    }
    res.histogram = ens.histogram(g);
    return res;
}

} // namespace elapse
