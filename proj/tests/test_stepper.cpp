#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracle_spectral.hpp"
#include "penlab/fixtures.hpp"
#include "penlab/generator.hpp"
#include "penlab/noise.hpp"
#include "penlab/problem.hpp"
#include "penlab/stepper.hpp"

using namespace penlab;

namespace {

FixtureBundle small_linear(fixtures::LinearVariant variant, int n_t) {
    Grid g{14.0, 129, BoundaryRule::ZeroExtension};
    return fixtures::linear_smooth(variant, g, TimeGrid::uniform(0.5, n_t));
}

} // namespace

TEST_CASE("zero data gives the zero solution") {
    Grid g{5.0, 33, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(0.5, 16);
    FixtureBundle b;
    b.spec.grid = g;
    b.spec.times = tg;
    b.spec.terminal = GridFunction(g);
    b.spec.f = zero_coefficient();
    b.spec.h = {zero_coefficient()};
    b.spec.obstacle = fixtures::inactive_obstacle(tg, g);
    DiscreteGenerator gen(g, 1.0, 1.0, 2.0);
    PenalizedSolution s = solve_penalized(b.spec, gen, 0.0, NoisePath::zero(tg, 1));
    REQUIRE(s.u.sup_norm() == 0.0);
    REQUIRE(s.nu.total_mass() == 0.0);
}

TEST_CASE("backward Euler tracks the closed-form integrator, first order") {
    auto error_at = [&](int n_t) {
        FixtureBundle b = small_linear(fixtures::LinearVariant::Deterministic, n_t);
        DiscreteGenerator gen = b.make_generator();
        PenalizedSolution s =
            solve_penalized(b.spec, gen, 0.0, NoisePath::zero(b.spec.times, 1));
        GridFunction shape(b.spec.grid);
        for (int i = 0; i < b.spec.grid.n_x; ++i) {
            double x = b.spec.grid.node(i);
            shape[i] = std::exp(-x * x / 8.0);
        }
        SpaceTimeField oracle = penlab_test::spectral_duhamel(
            gen, b.spec.times, b.spec.terminal, shape, 0.5, 0.5);
        return sup_l2_distance(s.u, oracle) / oracle.sup_l2();
    };
    double coarse = error_at(64);
    double fine = error_at(128);
    INFO("relative errors: " << coarse << " -> " << fine);
    REQUIRE(coarse < 4e-3);
    REQUIRE(fine < 0.7 * coarse);
}

TEST_CASE("damped solver with zero damping reproduces the penalized solver") {
    FixtureBundle b = small_linear(fixtures::LinearVariant::Noisy, 64);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(b.spec.times, 1, 99);
    PenalizedSolution s = solve_penalized(b.spec, gen, 0.0, noise);

    auto f = [](double t, double x) { return (0.5 + 0.5 * t) * std::exp(-x * x / 8.0); };
    std::vector<std::function<double(double, double)>> h = {
        [](double t, double x) { return 0.2 * (1.0 + 0.5 * t) * std::exp(-x * x / 8.0); }};
    SpaceTimeField d = solve_damped(gen, b.spec.times, 0.0, f, h, &noise, b.spec.terminal);
    REQUIRE(sup_l2_distance(s.u, d) < 1e-12);
}

TEST_CASE("solution is affine in additive noise") {
    FixtureBundle b = small_linear(fixtures::LinearVariant::Noisy, 64);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(b.spec.times, 1, 7);
    SpaceTimeField up = solve_penalized(b.spec, gen, 0.0, noise).u;
    SpaceTimeField um = solve_penalized(b.spec, gen, 0.0, noise.negated()).u;
    SpaceTimeField u0 =
        solve_penalized(b.spec, gen, 0.0, NoisePath::zero(b.spec.times, 1)).u;
    double worst = 0.0;
    for (int k = 0; k < up.n_frames(); ++k)
        for (int i = 0; i < b.spec.grid.n_x; ++i)
            worst = std::max(worst, std::abs(up.value(k, i) + um.value(k, i) -
                                             2.0 * u0.value(k, i)));
    REQUIRE(worst < 1e-10);
}

TEST_CASE("an inactive obstacle leaves the dynamics untouched") {
    FixtureBundle b = small_linear(fixtures::LinearVariant::Noisy, 64);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(b.spec.times, 1, 3);
    PenalizedSolution free = solve_penalized(b.spec, gen, 0.0, noise);
    PenalizedSolution pen = solve_penalized(b.spec, gen, 64.0, noise);
    REQUIRE(sup_l2_distance(free.u, pen.u) < 1e-13);
    REQUIRE(pen.nu.total_mass() == 0.0);
}

TEST_CASE("damped equation: energy decay in the damping level") {
    fixtures::DecaySource src;
    DiscreteGenerator gen = src.make_generator();
    auto f = [&](double, double x) {
        double s = 1.0;
        return std::exp(-x * x / (2.0 * s * s));
    };
    std::vector<std::function<double(double, double)>> h;
    GridFunction terminal(src.grid);

    double f_sq = inner(src.f, src.f);
    double T = src.times.T();
    auto shape = [&](double n) {
        return f_sq * (T / n + (1.0 - std::exp(-2.0 * n * T)) / (2.0 * n));
    };

    std::vector<double> levels = {1, 2, 4, 8, 16, 32, 64, 128};
    std::vector<double> q;
    for (double n : levels) {
        SpaceTimeField u = solve_damped(gen, src.times, n, f, h, nullptr, terminal);
        q.push_back(energy_time_integral(gen, u));
    }
    double c = q.front() / shape(levels.front());
    for (std::size_t j = 0; j < levels.size(); ++j) {
        INFO("n = " << levels[j] << ", q = " << q[j]
                    << ", bound = " << c * shape(levels[j]));
        if (j > 0) REQUIRE(q[j] < q[j - 1]);
        REQUIRE(q[j] <= c * shape(levels[j]) * (1.0 + 1e-9));
    }
    REQUIRE(q.back() <= 0.05 * q.front());
}

TEST_CASE("penalty deficit is attributed to cells exactly") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::active_obstacle(false, g, tg);
    DiscreteGenerator gen = b.make_generator();
    double n_level = 64.0;
    PenalizedSolution s = solve_penalized(b.spec, gen, n_level, NoisePath::zero(tg, 1));

    double h = g.spacing();
    double worst = 0.0;
    for (int k = 0; k < tg.n_intervals(); ++k) {
        double dt = tg.dt(k);
        for (int i = 0; i < g.n_x; ++i) {
            double deficit = n_level * std::max(0.0, b.spec.obstacle.value(k + 1, i) -
                                                         s.u.value(k + 1, i));
            worst = std::max(worst, std::abs(s.nu.cell_mass[static_cast<std::size_t>(k)]
                                                           [static_cast<std::size_t>(i)] -
                                             deficit * dt * h));
        }
    }
    REQUIRE(worst < 1e-12);
    REQUIRE(s.nu.total_mass() > 0.0); // the fixture forces contact

    // Pairing conventions: phi == 1 recovers the mass, phi == t pairs each
    // interval with its left node.
    REQUIRE(s.nu.pairing([](double, double) { return 1.0; }) ==
            Catch::Approx(s.nu.total_mass()).epsilon(1e-12));
    double by_hand = 0.0;
    for (int k = 0; k < tg.n_intervals(); ++k) {
        double row = 0.0;
        for (int i = 0; i < g.n_x; ++i)
            row += s.nu.cell_mass[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        by_hand += tg.nodes[static_cast<std::size_t>(k)] * row;
    }
    REQUIRE(s.nu.pairing([](double t, double) { return t; }) ==
            Catch::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("solutions are monotone in the penalty level") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::active_obstacle(true, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 11);

    SpaceTimeField prev;
    bool have_prev = false;
    for (double n : {4.0, 8.0, 32.0, 128.0}) {
        SpaceTimeField u = solve_penalized(b.spec, gen, n, noise).u;
        if (have_prev) {
            double worst = 0.0;
            for (int k = 0; k < u.n_frames(); ++k)
                for (int i = 0; i < g.n_x; ++i)
                    worst = std::max(worst, prev.value(k, i) - u.value(k, i));
            REQUIRE(worst < 1e-10);
        }
        prev = u;
        have_prev = true;
    }
}

TEST_CASE("single step agrees with a one-interval sweep") {
    Grid g{5.0, 33, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(0.1, 1);
    FixtureBundle b = fixtures::active_obstacle(false, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 5);

    PenalizedSolution s = solve_penalized(b.spec, gen, 2.0, noise);
    GridFunction one = step_backward_penalized(b.spec.terminal, b.spec, gen, 2.0, 0.0,
                                               tg.dt(0), noise.increments[0]);
    for (int i = 0; i < g.n_x; ++i)
        REQUIRE(one[i] == Catch::Approx(s.u.value(0, i)).margin(1e-14));
}

TEST_CASE("stepper guards") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::active_obstacle(false, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = NoisePath::zero(tg, 1);

    // Penalty level too large for the step size.
    REQUIRE_THROWS_AS(solve_penalized(b.spec, gen, 300.0, noise), ConfigError);
    REQUIRE_THROWS_AS(solve_penalized(b.spec, gen, -1.0, noise), ConfigError);
    // Noise on the wrong grid.
    NoisePath bad = NoisePath::zero(TimeGrid::uniform(0.5, 32), 1);
    REQUIRE_THROWS_AS(solve_penalized(b.spec, gen, 0.0, bad), ConfigError);
    // Noise dimension mismatch.
    NoisePath two = NoisePath::zero(tg, 2);
    REQUIRE_THROWS_AS(solve_penalized(b.spec, gen, 0.0, two), ConfigError);
    // Generator on a different grid.
    DiscreteGenerator other(Grid{5.0, 33, BoundaryRule::ZeroExtension}, 1.0, 1.0, 2.0);
    REQUIRE_THROWS_AS(solve_penalized(b.spec, other, 0.0, noise), ConfigError);
    REQUIRE_THROWS_AS(ImplicitStep(gen, 0.0), ConfigError);
}
