#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <elapse/steady_state.hpp>

using namespace elapse;

namespace {

RateModel smooth_table(double a, double b) {
    std::vector<double> xk;
    for (double x = 0.0; x <= 12.0; x += 0.5) xk.push_back(x);
    xk.push_back(60.0);
    std::vector<double> ik;
    for (int i = 0; i <= 12; ++i) ik.push_back(1.5 * i / 12.0);
    std::vector<std::vector<double>> vals(xk.size(), std::vector<double>(ik.size()));
    for (std::size_t i = 0; i < xk.size(); ++i)
        for (std::size_t j = 0; j < ik.size(); ++j)
            vals[i][j] = 0.5 + (1.0 - std::exp(-xk[i])) * (a - b * ik[j]);
    return RateModel::tabulated(xk, ik, vals, true);
}

} // namespace

TEST_CASE("cumulative rate: closed forms") {
    SECTION("constant hazard integrates to level * x") {
        const auto m = RateModel::constant(2.0);
        const Grid g(0.01, 500);
        CHECK(cumulative_rate(m, g, 0.0, 0.3) == 0.0);
        CHECK(cumulative_rate(m, g, 1.0, 0.3) == Catch::Approx(2.0).margin(1e-12));
        CHECK(cumulative_rate(m, g, 3.5, 0.9) == Catch::Approx(7.0).margin(1e-12));
    }
    SECTION("threshold hazard: piecewise-linear exponent, exact at the jump") {
        const auto m = RateModel::step_fixed_threshold(0.5, 1.0);
        const Grid g(1e-3, 4000);
        CHECK(cumulative_rate(m, g, 2.0, 0.1) == Catch::Approx(2.0).margin(1e-12));
        CHECK(cumulative_rate(m, g, 1.0, 0.1) == Catch::Approx(0.5).margin(1e-12));
        CHECK(cumulative_rate(m, g, 0.0, 0.1) == 0.0);
    }
    SECTION("unaligned threshold still integrates exactly") {
        const auto m = RateModel::step_fixed_threshold(0.5, 0.77730203);
        const Grid g(1e-2, 300);
        const double s = 0.77730203;
        CHECK(cumulative_rate(m, g, 2.0, 0.0) ==
              Catch::Approx(0.5 * 2.0 + (2.0 - s)).margin(1e-12));
    }
}

TEST_CASE("phi: closed forms and bounds") {
    SECTION("unit constant hazard has unit activity for every input") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        for (double I : {0.0, 0.3, 0.99})
            CHECK(phi(m, g, I) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("fixed threshold matches the closed form to quadrature dust") {
        const auto m = RateModel::step_fixed_threshold(0.5, 1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 0.5);
        const double closed = step_family_phi(1.0, 0.5);
        CHECK(phi(m, g, 0.3) == Catch::Approx(closed).margin(1e-10));
        CHECK(closed == Catch::Approx(0.8394).margin(1e-4));
    }
    SECTION("threshold-family values live in [r0, r0+1]") {
        const auto m = RateModel::step(0.5, [](double I) { return 0.2 + 2.0 * I; }, 2.0);
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        for (double I = 0.0; I <= 1.5; I += 0.05) {
            const double p = phi(m, g, I);
            REQUIRE(p >= 0.5);
            REQUIRE(p <= 1.5);
        }
    }
    SECTION("threshold-family phi is grid independent") {
        const auto m = RateModel::tanh_phi(0.5, 1.5);
        const Grid fine = Grid::with_negligible_tail(1e-3, 0.5);
        const Grid coarse = Grid::with_negligible_tail(5e-3, 0.5);
        for (double I : {0.1, 0.6, 0.75, 1.2})
            CHECK(phi(m, fine, I) == Catch::Approx(phi(m, coarse, I)).margin(1e-12));
    }
    SECTION("tail bracket too wide raises the x_max error") {
        const auto m = RateModel::step_fixed_threshold(0.5, 1.0);
        const Grid tiny(0.1, 20); // x_max = 2, survival ~ e^{-2}
        CHECK_THROWS_WITH(phi(m, tiny, 0.3),
                          Catch::Matchers::ContainsSubstring("increase x_max"));
    }
}

TEST_CASE("phi: monotone, positive, bounded, second-order in dx") {
    SECTION("non-increasing on a 1e3 grid for inhibitory models") {
        const RateModel models[] = {RateModel::tanh_phi(0.5, 1.5),
                                    smooth_table(1.0, 0.05)};
        for (const auto& m : models) {
            const Grid g = Grid::with_negligible_tail(5e-3, m.r_min());
            double prev = phi(m, g, 0.0);
            for (int k = 1; k <= 1000; ++k) {
                const double I = m.r_max() * k / 1000.0;
                const double p = phi(m, g, I);
                REQUIRE(p <= prev + 1e-12);
                REQUIRE(p > 0.0);
                REQUIRE(p <= m.r_max());
                prev = p;
            }
        }
    }
    SECTION("halving dx changes phi at second order (smooth family)") {
        // dx divides the knot spacing so the table's kinks sit on nodes and
        // only the smooth within-cell error remains.
        const auto m = smooth_table(1.0, 0.05);
        const double I = 0.8;
        const Grid g1 = Grid::with_extent(0.01, 56.0);
        const Grid g2 = Grid::with_extent(0.005, 56.0);
        const Grid g4 = Grid::with_extent(0.0025, 56.0);
        const double d12 = std::fabs(phi(m, g1, I) - phi(m, g2, I));
        const double d24 = std::fabs(phi(m, g2, I) - phi(m, g4, I));
        REQUIRE(d24 > 0.0);
        CHECK(d12 / d24 == Catch::Approx(4.0).margin(1.0));
    }
}

TEST_CASE("stationary density: profile, boundary value, unit mass") {
    SECTION("constant hazard gives the exponential profile") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        const Density n = stationary_density(m, g, 0.4);
        for (std::size_t j = 0; j < g.n_nodes(); j += 997)
            REQUIRE(n.values[j] == Catch::Approx(std::exp(-g.node(j))).margin(1e-10));
    }
    SECTION("boundary node equals phi") {
        const auto m = RateModel::tanh_phi(0.5, 1.5);
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        for (double I : {0.2, 0.75, 1.4})
            CHECK(stationary_density(m, g, I).values[0] ==
                  Catch::Approx(phi(m, g, I)).margin(1e-14));
    }
    SECTION("pointwise match with the survival exponent") {
        const auto m = RateModel::step(0.5, [](double I) { return 0.5 + I; }, 1.0);
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const double I = 0.63;
        const Density n = stationary_density(m, g, I);
        const auto R = cumulative_rate_profile(m, g, I);
        const double p = phi(m, g, I);
        for (std::size_t j = 0; j < g.n_nodes(); j += 211)
            REQUIRE(n.values[j] == Catch::Approx(p * std::exp(-R[j])).margin(1e-12));
    }
    SECTION("unit mass within 1e-8 for all families at fine resolution") {
        const RateModel models[] = {
            RateModel::constant(1.0),
            RateModel::step_fixed_threshold(0.5, 1.0),
            RateModel::tanh_phi(0.5, 1.5),
            smooth_table(1.0, 0.05),
        };
        for (const auto& m : models) {
            const Grid g = Grid::with_negligible_tail(2e-4, m.r_min());
            const Density n = stationary_density(m, g, 0.8);
            REQUIRE(n.mass() == Catch::Approx(1.0).margin(1e-8));
            REQUIRE(n.nonnegative());
        }
    }
}

TEST_CASE("fixed point of the activity map") {
    SECTION("constant hazard: the level is the fixed point") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        const SteadyState ss = fixed_point_phi(m, g);
        CHECK(ss.I_bar == Catch::Approx(1.0).margin(1e-12));
        CHECK(ss.residual <= 1e-12 * m.r_max());
        CHECK(ss.density.mass() == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("tanh map: fixed point at the midpoint") {
        const auto m = RateModel::tanh_phi(0.5, 1.5);
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        CHECK(ss.I_bar == Catch::Approx(0.75).margin(1e-10));
    }
    SECTION("matches a dense scan of phi(I) - I") {
        const auto m = RateModel::step(0.5, [](double I) { return I; }, 1.0);
        const Grid g = Grid::with_negligible_tail(0.05, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        // brute-force oracle: first sign change over a uniform activity grid
        const std::size_t points = 1000000;
        double root = -1.0;
        double prev = phi(m, g, 0.0) - 0.0;
        for (std::size_t k = 1; k <= points; ++k) {
            const double I = m.r_max() * static_cast<double>(k) / points;
            const double v = phi(m, g, I) - I;
            if (prev > 0.0 && v <= 0.0) {
                root = I;
                break;
            }
            prev = v;
        }
        REQUIRE(root > 0.0);
        CHECK(ss.I_bar == Catch::Approx(root).margin(2.0 * m.r_max() / points));
    }
    SECTION("non-inhibitory models are refused") {
        const auto m = RateModel::step(0.5, [](double I) { return 2.0 - I; }, 1.0, false);
        const Grid g = Grid::with_negligible_tail(0.05, 0.5);
        CHECK_THROWS_AS(fixed_point_phi(m, g), numeric_error);
    }
}
