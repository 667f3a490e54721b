#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <elapse/errors.hpp>

namespace elapse {

enum class RateKind { Constant, Step, TanhPhi, Tabulated };

inline const char* to_string(RateKind k) {
    switch (k) {
        case RateKind::Constant: return "constant";
        case RateKind::Step: return "step";
        case RateKind::TanhPhi: return "tanh_phi";
        case RateKind::Tabulated: return "tabulated";
    }
    return "?";
}

/// Activity map of the threshold family r(x) = r0 + 1_{x >= sigma}:
/// phi = ((1 - e^{-r0 sigma})/r0 + e^{-r0 sigma}/(1 + r0))^{-1}.
inline double step_family_phi(double sigma, double r0) {
    if (!(sigma >= 0.0))
        throw invalid_argument_error("step_family_phi: sigma must be >= 0");
    if (r0 < 1e-12) return 1.0 / (1.0 + sigma);
    const double u = std::exp(-r0 * sigma);
    return 1.0 / (-std::expm1(-r0 * sigma) / r0 + u / (1.0 + r0));
}

/// Inverse of step_family_phi in sigma. Defined for phi_value in (r0, r0+1];
/// phi_value = r0 + 1 maps to sigma = 0, phi_value -> r0 maps to sigma -> inf.
inline double sigma_from_phi(double phi_value, double r0) {
    if (!(std::isfinite(phi_value)) || phi_value <= r0 || phi_value > r0 + 1.0)
        throw numeric_error("sigma_from_phi: phi value out of range (r0, r0+1]");
    if (r0 < 1e-12) return 1.0 / phi_value - 1.0;
    const double u = (1.0 + r0) * (phi_value - r0) / phi_value;
    return u >= 1.0 ? 0.0 : -std::log(u) / r0;
}

/// Rate profile with the activity argument frozen. This is what inner loops
/// consume: the threshold age (and any interpolation) is resolved once per
/// activity value instead of once per node.
struct RateSlice {
    enum class Tag { Flat, Threshold, Table };
    Tag tag = Tag::Flat;
    double base = 0.0;     // Flat: the level; Threshold: rate below the jump
    double jump_x = std::numeric_limits<double>::infinity();
    const std::vector<double>* x_knots = nullptr; // Table only
    std::vector<double> row;                      // rate at x_knots, frozen I

    double operator()(double x) const {
        switch (tag) {
            case Tag::Flat: return base;
            case Tag::Threshold: return x >= jump_x ? base + 1.0 : base;
            case Tag::Table: {
                const auto& xs = *x_knots;
                if (x <= xs.front()) return row.front();
                if (x >= xs.back()) return row.back();
                const auto it = std::upper_bound(xs.begin(), xs.end(), x);
                const std::size_t k = static_cast<std::size_t>(it - xs.begin()) - 1;
                const double w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                return row[k] + w * (row[k + 1] - row[k]);
            }
        }
        return base;
    }

    bool has_threshold() const { return tag == Tag::Threshold; }
};

namespace detail {

struct TabulatedRate {
    std::vector<double> x_knots;
    std::vector<double> i_knots;
    std::vector<std::vector<double>> values; // values[ix][iI]

    double interp(double x, double I) const {
        const std::size_t kx = cell_index(x_knots, x);
        const std::size_t ki = cell_index(i_knots, I);
        const double wx = cell_weight(x_knots, kx, x);
        const double wi = cell_weight(i_knots, ki, I);
        const double lo = values[kx][ki] + wi * (values[kx][ki + 1] - values[kx][ki]);
        const double hi =
            values[kx + 1][ki] + wi * (values[kx + 1][ki + 1] - values[kx + 1][ki]);
        return lo + wx * (hi - lo);
    }

    /// dr/dI at (x, I); piecewise constant in I, using the knot interval
    /// containing I (left-closed).
    double slope_I(double x, double I) const {
        const std::size_t kx = cell_index(x_knots, x);
        const std::size_t ki = cell_index(i_knots, I);
        const double wx = cell_weight(x_knots, kx, x);
        const double di = i_knots[ki + 1] - i_knots[ki];
        const double slo = (values[kx][ki + 1] - values[kx][ki]) / di;
        const double shi = (values[kx + 1][ki + 1] - values[kx + 1][ki]) / di;
        return slo + wx * (shi - slo);
    }

    static std::size_t cell_index(const std::vector<double>& knots, double v) {
        if (v <= knots.front()) return 0;
        if (v >= knots.back()) return knots.size() - 2;
        const auto it = std::upper_bound(knots.begin(), knots.end(), v);
        return static_cast<std::size_t>(it - knots.begin()) - 1;
    }
    static double cell_weight(const std::vector<double>& knots, std::size_t k, double v) {
        const double w = (v - knots[k]) / (knots[k + 1] - knots[k]);
        return std::clamp(w, 0.0, 1.0);
    }
};

} // namespace detail

/// Discharge-rate family. Immutable after construction; safe to share across
/// concurrent simulations. Structural bounds r_min <= r(x,I) <= r_max and the
/// activity-sensitivity bound gamma_bar are stored attributes, checked by
/// sampling at construction.
class RateModel {
public:
    static RateModel constant(double level) {
        if (!(level >= 0.0) || !std::isfinite(level))
            throw invalid_argument_error("constant rate: level must be finite and >= 0");
        RateModel m;
        m.kind_ = RateKind::Constant;
        m.level_ = level;
        m.r_min_ = m.r_max_ = level;
        m.gamma_bar_ = 0.0;
        m.inhibitory_ = true; // dr/dI = 0
        return m;
    }

    /// Threshold rate r(x,I) = r0 + 1_{x >= sigma(I)}. The user supplies a
    /// Lipschitz bound for sigma; it stands in for the (non-existent) uniform
    /// bound on dr/dI when the threshold moves.
    static RateModel step(double r0, std::function<double(double)> sigma,
                          double sigma_lipschitz, bool inhibitory = true) {
        if (!(r0 >= 0.0) || !std::isfinite(r0))
            throw invalid_argument_error("step rate: r0 must be finite and >= 0");
        if (!sigma)
            throw invalid_argument_error("step rate: sigma callable is empty");
        if (!(sigma_lipschitz >= 0.0))
            throw invalid_argument_error("step rate: sigma Lipschitz bound must be >= 0");
        RateModel m;
        m.kind_ = RateKind::Step;
        m.r_min_ = r0;
        m.r_max_ = r0 + 1.0;
        m.sigma_ = std::move(sigma);
        m.gamma_bar_ = sigma_lipschitz;
        m.inhibitory_ = inhibitory;
        m.validate_threshold_family();
        return m;
    }

    static RateModel step_fixed_threshold(double r0, double sigma) {
        if (!std::isfinite(sigma) || sigma < 0.0)
            throw invalid_argument_error("step rate: sigma must be finite and >= 0");
        return step(r0, [sigma](double) { return sigma; }, 0.0, true);
    }

    /// Threshold rate whose induced activity map is prescribed as
    /// phi(I) = a*tanh(2 gamma / |1-r0| * (fp - I)) + fp with a = |1-r0|/2 and
    /// fp = (1+r0)/2; the threshold is recovered by inverting the closed-form
    /// map of the step family. |phi'(fp)| = gamma.
    static RateModel tanh_phi(double r0, double gamma) {
        if (!(gamma > 0.0))
            throw invalid_argument_error("tanh_phi rate: gamma must be > 0");
        if (!(r0 > 0.0) || !(r0 < 1.0))
            throw invalid_argument_error(
                "tanh_phi rate: requires 0 < r0 < 1 so the map stays in (r0, r0+1)");
        RateModel m;
        m.kind_ = RateKind::TanhPhi;
        m.r_min_ = r0;
        m.r_max_ = r0 + 1.0;
        m.gamma_bar_ = gamma;
        m.inhibitory_ = true;
        m.tanh_gamma_ = gamma;
        const double r0c = r0;
        const double fp = 0.5 * (1.0 + r0);
        const double amp = 0.5 * std::fabs(1.0 - r0);
        const double slope = 2.0 * gamma / std::fabs(1.0 - r0);
        m.prescribed_ = [fp, amp, slope](double I) {
            return amp * std::tanh(slope * (fp - I)) + fp;
        };
        auto prescribed = m.prescribed_;
        m.sigma_ = [prescribed, r0c](double I) {
            return sigma_from_phi(prescribed(I), r0c);
        };
        m.validate_threshold_family();
        return m;
    }

    static RateModel tabulated(std::vector<double> x_knots, std::vector<double> i_knots,
                               std::vector<std::vector<double>> values, bool inhibitory) {
        if (x_knots.size() < 2 || i_knots.size() < 2)
            throw invalid_argument_error("tabulated rate: need at least 2x2 knots");
        if (!std::is_sorted(x_knots.begin(), x_knots.end()) ||
            !std::is_sorted(i_knots.begin(), i_knots.end()))
            throw invalid_argument_error("tabulated rate: knots must be ascending");
        if (values.size() != x_knots.size())
            throw invalid_argument_error("tabulated rate: row count != x knot count");
        for (const auto& row : values)
            if (row.size() != i_knots.size())
                throw invalid_argument_error("tabulated rate: column count != I knot count");

        RateModel m;
        m.kind_ = RateKind::Tabulated;
        m.inhibitory_ = inhibitory;
        m.table_.x_knots = std::move(x_knots);
        m.table_.i_knots = std::move(i_knots);
        m.table_.values = std::move(values);

        double vmin = std::numeric_limits<double>::infinity();
        double vmax = -vmin;
        double gmax = 0.0;
        const auto& tb = m.table_;
        for (std::size_t ix = 0; ix < tb.x_knots.size(); ++ix) {
            for (std::size_t ii = 0; ii < tb.i_knots.size(); ++ii) {
                const double v = tb.values[ix][ii];
                if (!std::isfinite(v) || v < 0.0)
                    throw invalid_argument_error("tabulated rate: values must be finite, >= 0");
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
                if (ii + 1 < tb.i_knots.size()) {
                    const double s = (tb.values[ix][ii + 1] - tb.values[ix][ii]) /
                                     (tb.i_knots[ii + 1] - tb.i_knots[ii]);
                    gmax = std::max(gmax, std::fabs(s));
                    if (inhibitory && s > 1e-12)
                        throw invalid_argument_error(
                            "tabulated rate: flagged inhibitory but table has a "
                            "positive I-slope");
                }
            }
        }
        m.r_min_ = vmin;
        m.r_max_ = vmax;
        m.gamma_bar_ = gmax;
        // Crude sampled check that |dI R| e^{-R} stays integrable: bilinear
        // tables have bounded slopes, so this only guards absurd magnitudes.
        m.bounded_sensitivity_ = gmax < 1e6;
        return m;
    }

    RateKind kind() const { return kind_; }
    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    double gamma_bar() const { return gamma_bar_; }
    bool inhibitory() const { return inhibitory_; }
    bool strictly_excitable() const { return r_min_ > 0.0; }
    bool bounded_sensitivity() const { return bounded_sensitivity_; }

    double clamp_activity(double I) const {
        if (std::isnan(I)) throw numeric_error("rate: NaN activity");
        return std::clamp(I, 0.0, r_max_);
    }

    double rate(double x, double I) const {
        const double Ic = clamp_activity(I);
        switch (kind_) {
            case RateKind::Constant: return level_;
            case RateKind::Step:
            case RateKind::TanhPhi: return x >= sigma_(Ic) ? r_min_ + 1.0 : r_min_;
            case RateKind::Tabulated: return table_.interp(x, clamp_table(Ic));
        }
        return 0.0;
    }

    /// dr/dI. Threshold families carry their I-dependence in the jump location
    /// and are rejected here.
    double d_rate_dI(double x, double I) const {
        switch (kind_) {
            case RateKind::Constant: return 0.0;
            case RateKind::Step:
            case RateKind::TanhPhi:
                throw numeric_error("d_rate_dI: non-differentiable family");
            case RateKind::Tabulated:
                return table_.slope_I(x, clamp_table(clamp_activity(I)));
        }
        return 0.0;
    }

    RateSlice at_activity(double I) const {
        const double Ic = clamp_activity(I);
        RateSlice s;
        switch (kind_) {
            case RateKind::Constant:
                s.tag = RateSlice::Tag::Flat;
                s.base = level_;
                break;
            case RateKind::Step:
            case RateKind::TanhPhi:
                s.tag = RateSlice::Tag::Threshold;
                s.base = r_min_;
                s.jump_x = sigma_(Ic);
                break;
            case RateKind::Tabulated: {
                s.tag = RateSlice::Tag::Table;
                s.x_knots = &table_.x_knots;
                const double It = clamp_table(Ic);
                s.row.resize(table_.x_knots.size());
                for (std::size_t k = 0; k < s.row.size(); ++k)
                    s.row[k] = table_.interp(table_.x_knots[k], It);
                break;
            }
        }
        return s;
    }

    std::optional<double> threshold_age(double I) const {
        if (kind_ == RateKind::Step || kind_ == RateKind::TanhPhi)
            return sigma_(clamp_activity(I));
        return std::nullopt;
    }

    /// Target activity map of the tanh_phi family; empty for other kinds.
    std::optional<double> prescribed_phi(double I) const {
        if (kind_ == RateKind::TanhPhi) return prescribed_(clamp_activity(I));
        return std::nullopt;
    }

    /// User assertion that I -> r(x_star, I) is strictly decreasing; verified
    /// by sampling (non-increasing everywhere, strictly smaller endpoints).
    void assert_strict_interior_decrease(double x_star) {
        constexpr int samples = 512;
        double prev = rate(x_star, 0.0);
        const double first = prev;
        for (int k = 1; k <= samples; ++k) {
            const double I = r_max_ * static_cast<double>(k) / samples;
            const double v = rate(x_star, I);
            if (v > prev + 1e-12)
                throw invalid_argument_error(
                    "strict interior decrease: r(x*, I) increases on samples");
            prev = v;
        }
        if (!(prev < first))
            throw invalid_argument_error(
                "strict interior decrease: r(x*, .) not strictly smaller at r_max");
        strict_interior_decrease_ = true;
        x_star_ = x_star;
    }
    bool has_strict_interior_decrease() const { return strict_interior_decrease_; }

private:
    RateModel() = default;

    double clamp_table(double I) const {
        return std::clamp(I, table_.i_knots.front(), table_.i_knots.back());
    }

    void validate_threshold_family() {
        constexpr int samples = 512;
        double prev = sigma_(0.0);
        for (int k = 0; k <= samples; ++k) {
            const double I = r_max_ * static_cast<double>(k) / samples;
            const double s = sigma_(I);
            if (!std::isfinite(s) || s < 0.0)
                throw invalid_argument_error("step rate: sigma(I) must be finite and >= 0");
            if (inhibitory_ && s < prev - 1e-12)
                throw invalid_argument_error(
                    "step rate: flagged inhibitory but sigma(I) decreases on samples");
            prev = s;
        }
    }

    RateKind kind_ = RateKind::Constant;
    double level_ = 0.0;
    double r_min_ = 0.0;
    double r_max_ = 0.0;
    double gamma_bar_ = 0.0;
    bool inhibitory_ = false;
    bool bounded_sensitivity_ = true;
    bool strict_interior_decrease_ = false;
    double x_star_ = 0.0;
    double tanh_gamma_ = 0.0;
    std::function<double(double)> sigma_;
    std::function<double(double)> prescribed_;
    detail::TabulatedRate table_;
};

} // namespace elapse
