#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <elapse/grid.hpp>
#include <elapse/rate_model.hpp>
#include <elapse/steady_state.hpp>

using namespace elapse;

namespace {

RateModel smooth_table(double a, double b) {
    // r(x, I) = 0.5 + (1 - e^{-x}) (a - b I), sampled on coarse knots.
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

TEST_CASE("constant rate is the level everywhere") {
    const auto m = RateModel::constant(1.0);
    CHECK(m.rate(3.0, 0.2) == 1.0);
    CHECK(m.rate(0.0, 5.0) == 1.0);
    CHECK(m.r_min() == 1.0);
    CHECK(m.r_max() == 1.0);
    CHECK(m.inhibitory());
}

TEST_CASE("step rate jumps by one at the threshold") {
    const auto m = RateModel::step_fixed_threshold(0.5, 1.0);
    CHECK(m.rate(0.5, 0.7) == 0.5);
    CHECK(m.rate(2.0, 0.7) == 1.5);
    CHECK(m.rate(1.0, 0.7) == 1.5); // closed on the right of the threshold
    CHECK(m.r_max() == 1.5);
}

TEST_CASE("sigma_from_phi inverts the threshold-family activity map") {
    SECTION("upper endpoint maps to zero threshold") {
        CHECK(sigma_from_phi(1.5, 0.5) == 0.0);
    }
    SECTION("closed-form round trip at sigma = 1") {
        const double phi1 = step_family_phi(1.0, 0.5);
        CHECK(phi1 == Catch::Approx(0.8394).margin(1e-4));
        CHECK(sigma_from_phi(phi1, 0.5) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("phi value 0.8394 lands near sigma = 1") {
        CHECK(sigma_from_phi(0.8394, 0.5) == Catch::Approx(1.0).margin(2e-4));
    }
    SECTION("identity on a sigma grid") {
        for (double sigma = 0.05; sigma < 12.0; sigma += 0.173) {
            const double back = sigma_from_phi(step_family_phi(sigma, 0.5), 0.5);
            REQUIRE(back == Catch::Approx(sigma).margin(1e-10));
        }
        // degenerate floor, separate closed form
        for (double sigma = 0.1; sigma < 8.0; sigma += 0.31) {
            const double back = sigma_from_phi(step_family_phi(sigma, 0.0), 0.0);
            REQUIRE(back == Catch::Approx(sigma).margin(1e-10));
        }
    }
    SECTION("out-of-range values are rejected") {
        CHECK_THROWS_AS(sigma_from_phi(0.5, 0.5), numeric_error);
        CHECK_THROWS_AS(sigma_from_phi(0.2, 0.5), numeric_error);
        CHECK_THROWS_AS(sigma_from_phi(1.6, 0.5), numeric_error);
    }
}

TEST_CASE("tanh_phi rate equals a step rate with the inverted threshold") {
    const auto m = RateModel::tanh_phi(0.5, 1.5);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> ux(0.0, 6.0), ui(0.0, 1.5);
    for (int k = 0; k < 200; ++k) {
        const double x = ux(rng);
        const double I = ui(rng);
        const double sigma = sigma_from_phi(*m.prescribed_phi(I), 0.5);
        const double expected = x >= sigma ? 1.5 : 0.5;
        REQUIRE(m.rate(x, I) == expected);
    }
}

TEST_CASE("rate bounds hold on random samples") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ux(0.0, 20.0);
    const RateModel models[] = {
        RateModel::constant(1.0),
        RateModel::step(0.5, [](double I) { return 0.5 + I; }, 1.0),
        RateModel::tanh_phi(0.5, 1.5),
        smooth_table(1.0, 0.05),
    };
    for (const auto& m : models) {
        std::uniform_real_distribution<double> ui(0.0, m.r_max());
        for (int k = 0; k < 10000; ++k) {
            const double r = m.rate(ux(rng), ui(rng));
            REQUIRE(r >= 0.0);
            REQUIRE(r <= m.r_max() + 1e-12);
            if (m.strictly_excitable()) REQUIRE(r >= m.r_min() - 1e-12);
        }
    }
}

TEST_CASE("activity argument is clamped into [0, r_max]") {
    const auto m = RateModel::step(0.5, [](double I) { return 0.5 + I; }, 1.0);
    CHECK(m.rate(1.0, -3.0) == m.rate(1.0, 0.0));
    CHECK(m.rate(1.0, 99.0) == m.rate(1.0, 1.5));
}

TEST_CASE("d_rate_dI: flat, tabulated, and rejections") {
    SECTION("constant has zero sensitivity") {
        const auto m = RateModel::constant(2.0);
        CHECK(m.d_rate_dI(1.0, 0.3) == 0.0);
    }
    SECTION("threshold families are rejected") {
        const auto step = RateModel::step_fixed_threshold(0.5, 1.0);
        CHECK_THROWS_WITH(step.d_rate_dI(1.0, 0.3),
                          Catch::Matchers::ContainsSubstring("non-differentiable"));
        const auto tp = RateModel::tanh_phi(0.5, 1.5);
        CHECK_THROWS_AS(tp.d_rate_dI(1.0, 0.3), numeric_error);
    }
    SECTION("inhibitory table has nonpositive slopes everywhere") {
        const auto m = smooth_table(1.0, 0.05);
        for (double x = 0.0; x < 12.0; x += 0.7)
            for (double I = 0.01; I < 1.5; I += 0.11)
                REQUIRE(m.d_rate_dI(x, I) <= 0.0);
    }
    SECTION("matches a central finite difference on the smooth family") {
        const auto m = smooth_table(1.0, 0.05);
        const double h = 1e-6;
        for (double x : {0.3, 1.7, 5.2})
            for (double I : {0.2, 0.71, 1.3}) {
                const double fd = (m.rate(x, I + h) - m.rate(x, I - h)) / (2.0 * h);
                REQUIRE(m.d_rate_dI(x, I) == Catch::Approx(fd).margin(1e-7));
            }
    }
    SECTION("gamma_bar bounds the sampled sensitivity") {
        const auto m = smooth_table(1.0, 0.05);
        CHECK(m.gamma_bar() == Catch::Approx(0.05).margin(1e-6));
        for (double x = 0.0; x < 12.0; x += 0.9)
            for (double I = 0.05; I < 1.45; I += 0.13)
                REQUIRE(std::fabs(m.d_rate_dI(x, I)) <= m.gamma_bar() + 1e-12);
    }
}

TEST_CASE("invalid parameters are rejected at construction") {
    CHECK_THROWS_AS(RateModel::tanh_phi(0.5, 0.0), invalid_argument_error);
    CHECK_THROWS_AS(RateModel::tanh_phi(0.5, -1.0), invalid_argument_error);
    CHECK_THROWS_AS(RateModel::tanh_phi(1.0, 1.5), invalid_argument_error);
    CHECK_THROWS_AS(RateModel::step_fixed_threshold(0.5, std::nan("")),
                    invalid_argument_error);
    CHECK_THROWS_AS(RateModel::constant(-1.0), invalid_argument_error);
    // decreasing sigma contradicts the inhibitory flag
    CHECK_THROWS_AS(RateModel::step(0.5, [](double I) { return 2.0 - I; }, 1.0, true),
                    invalid_argument_error);
    // but is fine when not flagged
    CHECK_NOTHROW(RateModel::step(0.5, [](double I) { return 2.0 - I; }, 1.0, false));
}

TEST_CASE("tabulated rate interpolates bilinearly and clamps outside") {
    const std::vector<double> xk = {0.0, 1.0};
    const std::vector<double> ik = {0.0, 1.0};
    const std::vector<std::vector<double>> vals = {{1.0, 0.5}, {2.0, 1.0}};
    const auto m = RateModel::tabulated(xk, ik, vals, true);
    CHECK(m.rate(0.0, 0.0) == 1.0);
    CHECK(m.rate(1.0, 0.0) == 2.0);
    CHECK(m.rate(0.5, 0.0) == Catch::Approx(1.5));
    CHECK(m.rate(0.5, 0.5) == Catch::Approx(0.5 * (0.75 + 1.5)));
    CHECK(m.rate(9.0, 0.0) == 2.0);  // constant extension beyond the last knot
    CHECK(m.r_min() == 0.5);
    CHECK(m.r_max() == 2.0);
    CHECK_THROWS_AS(RateModel::tabulated(xk, ik, {{1.0, 2.0}, {2.0, 3.0}}, true),
                    invalid_argument_error); // increasing in I but flagged inhibitory
}

TEST_CASE("strict interior decrease flag is sampled") {
    auto m = smooth_table(1.0, 0.05);
    CHECK_FALSE(m.has_strict_interior_decrease());
    m.assert_strict_interior_decrease(2.0);
    CHECK(m.has_strict_interior_decrease());
    auto flat = RateModel::constant(1.0);
    CHECK_THROWS_AS(flat.assert_strict_interior_decrease(1.0), invalid_argument_error);
}

TEST_CASE("tanh_phi induced activity map matches the prescribed one") {
    const auto m = RateModel::tanh_phi(0.5, 1.5);
    const Grid g = Grid::with_negligible_tail(5e-3, m.r_min());
    for (double I = 0.0; I <= 1.5; I += 0.093) {
        const double induced = phi(m, g, I);
        REQUIRE(induced == Catch::Approx(*m.prescribed_phi(I)).margin(1e-10));
    }
}
