#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <elapse/errors.hpp>

namespace elapse {

/// Uniform age grid on [0, x_max] with nodes x_j = j*dx, j = 0..n_cells.
/// The time step is locked to dx (unit CFL), so transport is an exact
/// one-node shift.
struct Grid {
    double dx = 0.0;
    std::size_t n_cells = 0;

    Grid() = default;
    Grid(double dx_, std::size_t n_cells_) : dx(dx_), n_cells(n_cells_) {
        if (!(dx > 0.0) || !std::isfinite(dx))
            throw invalid_argument_error("Grid: dx must be positive and finite");
        if (n_cells < 2)
            throw invalid_argument_error("Grid: need at least 2 cells");
    }

    double x_max() const { return dx * static_cast<double>(n_cells); }
    double dt() const { return dx; }
    std::size_t n_nodes() const { return n_cells + 1; }
    double node(std::size_t j) const { return dx * static_cast<double>(j); }
    double midpoint(std::size_t cell) const {
        return dx * (static_cast<double>(cell) + 0.5);
    }

    bool operator==(const Grid& other) const {
        return dx == other.dx && n_cells == other.n_cells;
    }
    bool operator!=(const Grid& other) const { return !(*this == other); }

    /// Grid whose truncated tail is negligible: smallest node multiple with
    /// exp(-r_floor * x_max) <= 1e-12. Requires a strictly positive rate floor.
    static Grid with_negligible_tail(double dx, double r_floor) {
        if (!(r_floor > 0.0))
            throw invalid_argument_error(
                "Grid::with_negligible_tail: rate floor must be > 0; "
                "pass an explicit x_max instead");
        const double x_needed = std::log(1e12) / r_floor;
        const auto n = static_cast<std::size_t>(std::ceil(x_needed / dx - 1e-12));
        return Grid(dx, n < 2 ? 2 : n);
    }

    static Grid with_extent(double dx, double x_max) {
        if (!(x_max > 0.0))
            throw invalid_argument_error("Grid::with_extent: x_max must be > 0");
        const auto n = static_cast<std::size_t>(std::ceil(x_max / dx - 1e-9));
        return Grid(dx, n < 2 ? 2 : n);
    }
};

/// Nonnegative grid function n(x_j). Mass is the trapezoid integral over
/// [0, x_max]; the truncated tail is carried by the last node.
struct Density {
    Grid grid;
    std::vector<double> values;

    Density() = default;
    explicit Density(const Grid& g) : grid(g), values(g.n_nodes(), 0.0) {}
    Density(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != g.n_nodes())
            throw invalid_argument_error("Density: value count does not match grid");
    }

    double mass() const {
        double s = 0.5 * (values.front() + values.back());
        for (std::size_t j = 1; j + 1 < values.size(); ++j) s += values[j];
        return s * grid.dx;
    }

    bool nonnegative(double tol = 0.0) const {
        for (double v : values)
            if (v < -tol) return false;
        return true;
    }

    void scale(double c) {
        for (double& v : values) v *= c;
    }

    /// Rescale to unit trapezoid mass.
    void normalize() {
        const double m = mass();
        if (!(m > 0.0))
            throw numeric_error("Density::normalize: nonpositive mass");
        scale(1.0 / m);
    }

    /// Project an analytic profile onto the nodes.
    template <typename F>
    static Density project(const Grid& g, F&& f, bool normalize_mass = true) {
        Density n(g);
        for (std::size_t j = 0; j < g.n_nodes(); ++j)
            n.values[j] = f(g.node(j));
        if (normalize_mass) n.normalize();
        return n;
    }
};

} // namespace elapse
