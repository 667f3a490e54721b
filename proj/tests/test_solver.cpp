#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <elapse/diagnostics.hpp>
#include <elapse/solver.hpp>
#include <elapse/steady_state.hpp>

using namespace elapse;

namespace {

RateModel step_affine() {
    return RateModel::step(0.5, [](double I) { return 0.5 + I; }, 1.0);
}

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

Density exp_density(const Grid& g, double k) {
    return Density::project(g, [k](double x) { return k * std::exp(-k * x); });
}

} // namespace

TEST_CASE("solve_activity: closed forms and oracle") {
    SECTION("constant hazard returns the level for any shape") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        for (double k : {0.5, 2.0, 4.0})
            CHECK(solve_activity(m, exp_density(g, k)) ==
                  Catch::Approx(1.0).margin(5e-3));
    }
    SECTION("stationary density returns the fixed point") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        CHECK(solve_activity(m, ss.density) == Catch::Approx(ss.I_bar).margin(1e-10));
    }
    SECTION("bisection root matches a dense scan") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(0.2, 3.0);
        for (int rep = 0; rep < 3; ++rep) {
            const double k1 = u(rng), k2 = u(rng);
            Density n = Density::project(g, [&](double x) {
                return k1 * std::exp(-k1 * x) + 0.3 * k2 * std::exp(-k2 * x);
            });
            const double root = solve_activity(m, n);
            const ActivityIntegral A(m, n);
            const std::size_t points = 1000000;
            double scan = -1.0;
            double prev = 0.0 - A(0.0);
            for (std::size_t i = 1; i <= points; ++i) {
                const double I = m.r_max() * static_cast<double>(i) / points;
                const double F = I - A(I);
                if (prev <= 0.0 && F >= 0.0) {
                    scan = I;
                    break;
                }
                prev = F;
            }
            REQUIRE(scan > 0.0);
            REQUIRE(root == Catch::Approx(scan).margin(1e-6));
        }
    }
    SECTION("activity lands in [0, r_max * mass]") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const Density n = exp_density(g, 2.0);
        const double I = solve_activity(m, n);
        CHECK(I >= 0.0);
        CHECK(I <= m.r_max() * n.mass() * (1.0 + 1e-2));
    }
    SECTION("non-inhibitory models are refused") {
        const auto m = RateModel::step(0.5, [](double I) { return 2.0 - I; }, 1.0, false);
        const Grid g(0.01, 100);
        CHECK_THROWS_WITH(solve_activity(m, Density(g)),
                          Catch::Matchers::ContainsSubstring("requires inhibition"));
    }
}

TEST_CASE("explicit_activity: closed forms") {
    SECTION("constant hazard: level times mass") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        Density n = exp_density(g, 2.0);
        n.scale(0.7);
        CHECK(explicit_activity(m, n, 0.12) == Catch::Approx(0.7).margin(5e-3));
    }
    SECTION("stationary profile reproduces the activity map") {
        const auto m = RateModel::tanh_phi(0.5, 1.5);
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        for (double J : {0.3, 0.75, 1.1}) {
            const Density n = stationary_density(m, g, J);
            CHECK(explicit_activity(m, n, J) ==
                  Catch::Approx(phi(m, g, J)).margin(1e-10));
        }
    }
    SECTION("uniform density against a fixed threshold: piecewise value") {
        const auto m = RateModel::step_fixed_threshold(0.5, 1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 0.5);
        const Density n = Density::project(
            g, [](double x) { return x <= 2.0 ? 0.5 : 0.0; });
        CHECK(explicit_activity(m, n, 0.4) == Catch::Approx(1.0).margin(5e-3));
    }
}

TEST_CASE("step: transport-decay building blocks") {
    const auto m = step_affine();
    const Grid g(0.01, 400);
    SECTION("zero density with zero inflow stays zero") {
        const Density out = step(m, Density(g), 0.0, 0.3);
        for (double v : out.values) REQUIRE(v == 0.0);
    }
    SECTION("stationary profile is invariant") {
        const auto mc = RateModel::constant(1.0);
        const Grid gc = Grid::with_negligible_tail(1e-3, 1.0);
        const SteadyState ss = fixed_point_phi(mc, gc);
        const Density out = step(mc, ss.density, ss.I_bar, ss.I_bar);
        double max_err = 0.0;
        for (std::size_t j = 0; j + 1 < gc.n_nodes(); ++j)
            max_err = std::max(max_err, std::fabs(out.values[j] - ss.density.values[j]));
        CHECK(max_err <= 1e-12);
    }
    SECTION("point mass moves one cell and decays") {
        Density n(g);
        n.values[30] = 5.0; // x = 0.3, below the threshold for I = 0.2
        const double I_arg = 0.2;
        const Density out = step(m, n, 0.0, I_arg);
        const double expected = 5.0 * std::exp(-g.dx * 0.5);
        CHECK(out.values[31] == Catch::Approx(expected).epsilon(1e-12));
        CHECK(out.values[30] == 0.0);
    }
    SECTION("negative density is rejected") {
        Density n(g);
        n.values[5] = -1.0;
        CHECK_THROWS_AS(step(m, n, 0.0, 0.1), invalid_argument_error);
    }
}

TEST_CASE("run_autonomous: stationarity and convergence") {
    SECTION("stationary start stays put") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        const RunResult res = run_autonomous(m, ss.density, 40.0);
        for (const auto& r : res.trace)
            REQUIRE(std::fabs(r.I - ss.I_bar) <= 1e-6);
    }
    SECTION("constant hazard: flat activity, rate-one contraction") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(2e-3, 1.0);
        const SteadyState ss = fixed_point_phi(m, g);
        RunOptions ro;
        ro.reference = &ss.density;
        const RunResult res = run_autonomous(m, exp_density(g, 2.0), 3.5, ro);
        std::vector<double> t, d;
        for (const auto& r : res.trace) {
            REQUIRE(std::fabs(r.I - 1.0) <= 3.0 * g.dx);
            t.push_back(r.t);
            d.push_back(r.dist_to_ref);
        }
        CHECK(decay_rate(t, d) >= 0.95);
    }
    SECTION("threshold model obeys the exponential envelope") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        const Density n0 = perturbed_stationary(m, g, 0.8);
        RunOptions ro;
        ro.reference = &ss.density;
        const RunResult res = run_autonomous(m, n0, 10.0, ro);
        const double d0 = res.trace.front().dist_to_ref;
        REQUIRE(d0 > 0.1);
        for (const auto& r : res.trace)
            REQUIRE(r.dist_to_ref <= 1.05 * d0 * std::exp(-0.5 * r.t) + 1e-12);
    }
}

TEST_CASE("run_autonomous: a-priori bounds") {
    const auto m = step_affine();
    const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
    const Density n0 = exp_density(g, 2.0);
    const RunResult res = run_autonomous(m, n0, 8.0);

    SECTION("activity stays in [0, r_max]") {
        for (const auto& r : res.trace) {
            REQUIRE(r.I >= 0.0);
            REQUIRE(r.I <= m.r_max());
        }
    }
    SECTION("mass drift is first order and halves with dx") {
        double drift_coarse = 0.0;
        for (const auto& r : res.trace)
            drift_coarse = std::max(drift_coarse, std::fabs(r.mass - 1.0));
        CHECK(drift_coarse <= 2.0 * g.dx * m.r_max() * 8.0);

        const Grid g2 = Grid::with_negligible_tail(2.5e-3, 0.5);
        const RunResult res2 = run_autonomous(m, exp_density(g2, 2.0), 8.0);
        double drift_fine = 0.0;
        for (const auto& r : res2.trace)
            drift_fine = std::max(drift_fine, std::fabs(r.mass - 1.0));
        REQUIRE(drift_fine > 0.0);
        CHECK(drift_coarse / drift_fine == Catch::Approx(2.0).margin(0.6));
    }
    SECTION("activity is Lipschitz with the initial-regularity constant") {
        const double K = k_ini(m, n0);
        for (std::size_t k = 0; k + 1 < res.trace.size(); ++k) {
            const double slope =
                std::fabs(res.trace[k + 1].I - res.trace[k].I) / g.dt();
            REQUIRE(slope <= m.r_max() * K * 1.1 + 1e-6);
        }
    }
}

TEST_CASE("time-derivative seminorm decays along autonomous runs") {
    const auto m = step_affine();
    const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
    Density cur = exp_density(g, 2.0);
    const double K0 = k_ini(m, cur);
    std::vector<double> derivative_norm;
    for (int k = 0; k < 400; ++k) {
        const double I = solve_activity(m, cur);
        const Density next = step(m, cur, I, I);
        Density diff(g);
        for (std::size_t j = 0; j < g.n_nodes(); ++j)
            diff.values[j] = (next.values[j] - cur.values[j]) / g.dt();
        derivative_norm.push_back(l1_distance(diff, Density(g)));
        cur = next;
    }
    for (std::size_t k = 0; k + 1 < derivative_norm.size(); ++k)
        REQUIRE(derivative_norm[k + 1] <= derivative_norm[k] + 2.0 * g.dx);
    REQUIRE(derivative_norm.back() <= K0 * (1.0 + 0.1) + 2.0 * g.dx);
}

TEST_CASE("run_linear: convergence under prescribed inputs") {
    const auto m = smooth_table(1.0, 0.1);
    const Grid g = Grid::with_extent(5e-3, 56.0);
    const SteadyState ss = fixed_point_phi(m, g);

    SECTION("constant input at the fixed point contracts at the floor rate") {
        RunOptions ro;
        ro.reference = &ss.density;
        const Density n0 = perturbed_stationary(m, g, 0.8);
        const RunResult res =
            run_linear(m, n0, [&](double) { return ss.I_bar; }, 12.0, ro);
        std::vector<double> t, d;
        for (const auto& r : res.trace) {
            t.push_back(r.t);
            d.push_back(r.dist_to_ref);
        }
        CHECK(decay_rate(t, d) >= 0.95 * 0.5);
    }
    SECTION("exponentially relaxing input obeys the two-rate envelope") {
        const double alpha = 0.25;
        const double c = 0.1 * m.r_max();
        const double C_r = m.gamma_bar() * c;
        const double beta = std::min(alpha, 0.5);
        RunOptions ro;
        ro.reference = &ss.density;
        const Density n0 = exp_density(g, 2.0);
        const RunResult res = run_linear(
            m, n0, [&](double t) { return ss.I_bar + c * std::exp(-alpha * t); }, 16.0,
            ro);
        const double factor = 2.0 * (1.0 + C_r / std::fabs(0.5 - alpha));
        for (const auto& r : res.trace) {
            REQUIRE(r.dist_to_ref <= 1.1 * factor * std::exp(-beta * r.t) + 5e-3);
            const double activity_bound =
                (m.r_max() * factor + C_r) * std::exp(-beta * r.t);
            REQUIRE(std::fabs(r.I - ss.I_bar) <= 1.1 * activity_bound + 5e-3);
        }
    }
}

TEST_CASE("two inputs: distance controlled by the input gap") {
    const auto m = smooth_table(1.0, 0.1);
    const Grid g = Grid::with_extent(0.01, 56.0);
    const SteadyState ss = fixed_point_phi(m, g);
    const Density n0 = exp_density(g, 2.0);
    auto J1 = [&](double) { return ss.I_bar; };
    auto J2 = [&](double t) { return ss.I_bar + 0.2 * std::sin(0.7 * t); };
    const double T = 10.0;
    const RunResult r1 = run_linear(m, n0, J1, T);
    const RunResult r2 = run_linear(m, n0, J2, T);

    Density a = n0, b = n0;
    double cum = 0.0;
    const auto steps = static_cast<std::size_t>(std::llround(T / g.dt()));
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * g.dt();
        const double gap = std::fabs(J1(t) - J2(t));
        const double dist = [&] {
            Density da = a, db = b;
            return l1_distance(da, db);
        }();
        REQUIRE(dist <= 2.0 * m.gamma_bar() * cum * 1.05 + 3.0 * g.dx * (1.0 + t));
        if (k == steps) break;
        a = step(m, a, explicit_activity(m, a, J1(t)), J1(t));
        b = step(m, b, explicit_activity(m, b, J2(t)), J2(t));
        cum += gap * g.dt();
    }
    (void)r1;
    (void)r2;
}

TEST_CASE("k_ini: closed forms and homogeneity") {
    SECTION("stationary data annihilates the transport operator") {
        const auto m = step_affine();
        const Grid g = Grid::with_negligible_tail(5e-3, 0.5);
        const SteadyState ss = fixed_point_phi(m, g);
        CHECK(k_ini(m, ss.density) <= 5.0 * g.dx);
    }
    SECTION("unit constant hazard with a steeper exponential") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(1e-3, 1.0);
        CHECK(k_ini(m, exp_density(g, 2.0)) == Catch::Approx(1.0).margin(0.01));
    }
    SECTION("scales linearly for the constant family") {
        const auto m = RateModel::constant(1.0);
        const Grid g = Grid::with_negligible_tail(2e-3, 1.0);
        Density n = exp_density(g, 2.0);
        const double k1 = k_ini(m, n);
        n.scale(3.0);
        CHECK(k_ini(m, n) == Catch::Approx(3.0 * k1).epsilon(1e-12));
    }
}
