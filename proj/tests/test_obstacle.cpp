#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "oracle_spectral.hpp"
#include "penlab/fixtures.hpp"
#include "penlab/noise.hpp"
#include "penlab/obstacle.hpp"

using namespace penlab;

namespace {

TimeGrid obstacle_times() { return TimeGrid::uniform(0.5, 128); }

std::vector<double> full_schedule() { return {4, 8, 16, 32, 64, 128, 256}; }

} // namespace

TEST_CASE("penalization ladder converges on the active fixture") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = obstacle_times();
    FixtureBundle b = fixtures::active_obstacle(true, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 21);

    ObstacleSolution sol = solve_obstacle(b.spec, gen, noise, full_schedule(), 0.05);
    REQUIRE(sol.converged);
    REQUIRE(sol.levels.size() >= 3);
    for (std::size_t j = 1; j < sol.levels.size(); ++j) {
        INFO("level " << sol.levels[j].n_level
                      << ": neg part " << sol.levels[j].sup_neg_part
                      << ", distance " << sol.levels[j].distance_to_prev);
        REQUIRE(sol.levels[j].sup_neg_part < sol.levels[j - 1].sup_neg_part);
        if (j >= 2)
            REQUIRE(sol.levels[j].distance_to_prev < sol.levels[j - 1].distance_to_prev);
    }
    // The penalty reacts to a noise kick one step late, so the obstacle
    // deficit cannot shrink below the single-step noise scale |h| sqrt(dt)
    // (about 0.02 here, 0.07 with the lattice-sup factor) no matter how
    // large n gets.
    REQUIRE(sol.final_level().sup_neg_part < 0.1);
    REQUIRE(sol.nu().total_mass() > 0.0);

    REQUIRE_THROWS_AS(solve_obstacle(b.spec, gen, noise, {}, 0.02), ConfigError);
    REQUIRE_THROWS_AS(solve_obstacle(b.spec, gen, noise, {8, 8}, 0.02), ConfigError);
    REQUIRE_THROWS_AS(solve_obstacle(b.spec, gen, noise, {4, 8}, 0.0), ConfigError);
}

TEST_CASE("penalized solutions approach the projected-SOR reference") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = obstacle_times();
    FixtureBundle b = fixtures::active_obstacle(false, g, tg);
    DiscreteGenerator gen = b.make_generator();

    std::vector<std::vector<double>> zero_noise(
        static_cast<std::size_t>(tg.n_intervals()), std::vector<double>(1, 0.0));
    SpaceTimeField ref = penlab_test::psor_obstacle(b.spec, gen, zero_noise);

    // The reference respects the constraint.
    double worst_gap = 0.0;
    for (int k = 0; k < ref.n_frames(); ++k)
        for (int i = 0; i < g.n_x; ++i)
            worst_gap = std::max(worst_gap,
                                 b.spec.obstacle.value(k, i) - ref.value(k, i));
    REQUIRE(worst_gap < 1e-9);

    NoisePath noise = NoisePath::zero(tg, 1);
    double prev = 1e300;
    for (double n : {16.0, 64.0, 256.0}) {
        PenalizedSolution sol = solve_penalized(b.spec, gen, n, noise);
        double dist = 0.0;
        for (int k = 0; k < ref.n_frames(); ++k)
            for (int i = 0; i < g.n_x; ++i)
                dist = std::max(dist, std::abs(sol.u.value(k, i) - ref.value(k, i)));
        INFO("n = " << n << ": sup distance to reference = " << dist);
        REQUIRE(dist < prev);
        prev = dist;
    }
    REQUIRE(prev < 0.02);
}

TEST_CASE("reflection measure is flat off the contact region") {
    // Production time resolution: the support gap of the measure is the
    // one-step noise kick, which scales like sqrt(dt), so the flatness
    // factor is a statement about the fine grid.
    Grid g = fixtures::active_grid();
    TimeGrid tg = fixtures::active_times();
    FixtureBundle b = fixtures::active_obstacle(true, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 21);

    // The pairing magnitude n * |(u - v)^-|^2 shrinks up the ladder: the
    // deficit decays faster than 1/sqrt(n) until it saturates at the
    // single-step noise kick, which happens only at the very top level.
    auto pairing_of = [&](double n) {
        PenalizedSolution sol = solve_penalized(b.spec, gen, n, noise);
        return sol.nu.pairing_with([&](int k, int i) {
            return sol.u.value(k + 1, i) - b.spec.obstacle.value(k + 1, i);
        });
    };
    double coarse = pairing_of(16.0);

    PenalizedSolution top = solve_penalized(b.spec, gen, 256.0, noise);
    SkorokhodReport rep =
        skorokhod_check(b.spec, top, 256.0, b.make_levy(0), 2000, 404);
    INFO("pairing = " << rep.grid_pairing << ", bound = " << rep.flatness_bound
                      << ", pathwise = " << rep.pathwise_mean << " +- "
                      << rep.pathwise_std_error);
    REQUIRE(rep.total_mass > 0.0);
    REQUIRE(rep.sup_gap > 0.0);
    REQUIRE(rep.grid_pairing < 0.0);
    REQUIRE(std::abs(rep.grid_pairing) < std::abs(coarse));
    REQUIRE(rep.grid_flat);
    REQUIRE(rep.routes_agree);
    REQUIRE(rep.n_escaped > 0);
    REQUIRE(rep.n_escaped < rep.n_paths / 2);

    // The pairing is exactly the penalization identity: every unit of
    // measure mass n (v - u)^+ dt h pairs with the gap -(v - u)^+ at the
    // node where the deficit was measured.
    double identity = 0.0;
    for (int k = 0; k + 1 < tg.n_nodes(); ++k)
        for (int i = 0; i < g.n_x; ++i) {
            double deficit = std::max(
                0.0, b.spec.obstacle.value(k + 1, i) - top.u.value(k + 1, i));
            identity -= 256.0 * deficit * deficit * tg.dt(k) * g.spacing();
        }
    REQUIRE(rep.grid_pairing ==
            Catch::Approx(identity).margin(1e-12 * std::abs(identity)));

    REQUIRE_THROWS_AS(skorokhod_check(b.spec, top, 256.0, b.make_levy(0), 1, 404),
                      ConfigError);
}

TEST_CASE("solutions inherit the ordering of the data") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = obstacle_times();
    auto [lo, hi] = fixtures::ordered_pair(g, tg);
    DiscreteGenerator gen = lo.make_generator();
    NoisePath noise = sample_noise(tg, 1, 33);

    ComparisonReport rep = comparison_test(lo.spec, hi.spec, gen, 64.0, noise);
    INFO("max violation = " << rep.max_violation);
    REQUIRE(rep.ordered);
    REQUIRE(rep.max_violation <= rep.tolerance);

    // Swapped data violate the terminal ordering precondition.
    REQUIRE_THROWS_AS(comparison_test(hi.spec, lo.spec, gen, 64.0, noise), ConfigError);

    // Different noise coefficients are rejected.
    FixtureBundle other = hi;
    other.spec.h = {coefficient_of([](double, double x) {
        return 0.3 * std::exp(-x * x / 8.0);
    })};
    REQUIRE_THROWS_AS(comparison_test(lo.spec, other.spec, gen, 64.0, noise),
                      ConfigError);

    // A drift that dips below the first one is rejected too.
    FixtureBundle bad_f = hi;
    bad_f.spec.f = coefficient_of([](double, double x) {
        return 0.1 * std::exp(-x * x / 8.0);
    });
    REQUIRE_THROWS_AS(comparison_test(lo.spec, bad_f.spec, gen, 64.0, noise),
                      ConfigError);
}

TEST_CASE("deficit decays in the penalization level on both routes") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = obstacle_times();
    FixtureBundle b = fixtures::active_obstacle(true, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 8);

    auto rows = negative_part_decay(b.spec, gen, noise, {4, 16, 64, 256},
                                    b.make_levy(0), 500, 606);
    REQUIRE(rows.size() == 4);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        INFO("n = " << rows[j].n_level << ": grid sup = " << rows[j].grid_sup
                    << ", pathwise = " << rows[j].em_value);
        REQUIRE(rows[j].grid_sup > 0.0);
        REQUIRE(rows[j].em_value > 0.0);
        if (j > 0) {
            REQUIRE(rows[j].grid_sup < rows[j - 1].grid_sup);
            REQUIRE(rows[j].em_value < rows[j - 1].em_value);
        }
    }
    REQUIRE(rows.back().em_value <= 0.1 * rows.front().em_value);
}

TEST_CASE("discrete weak form: exact with nodal increments, tight with midpoint") {
    Grid g = fixtures::active_grid();
    TimeGrid tg = obstacle_times();
    FixtureBundle b = fixtures::active_obstacle(true, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 13);
    PenalizedSolution sol = solve_penalized(b.spec, gen, 64.0, noise);

    auto phi = [](double t, double x) {
        return std::exp(0.7 * t) * std::exp(-x * x / 9.0);
    };
    WeakFormTerms exact = weak_form_terms(b.spec, gen, sol, noise, phi);
    INFO("exact-route residual = " << exact.residual() << " at scale " << exact.scale());
    REQUIRE(std::abs(exact.residual()) < 1e-11 * exact.scale());
    REQUIRE(exact.measure > 0.0); // the reflection term is genuinely present

    std::function<double(double, double)> dphi = [](double t, double x) {
        return 0.7 * std::exp(0.7 * t) * std::exp(-x * x / 9.0);
    };
    WeakFormTerms mid = weak_form_terms(b.spec, gen, sol, noise, phi, &dphi);
    INFO("midpoint-route residual = " << mid.residual() << " at scale " << mid.scale());
    REQUIRE(std::abs(mid.residual()) < 1e-5 * mid.scale());
    REQUIRE(std::abs(mid.residual()) > 0.0);
}

TEST_CASE("inactive obstacle: free solution, empty measure, flat reports") {
    Grid g{14.0, 129, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::linear_smooth(fixtures::LinearVariant::Noisy, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 55);

    ObstacleSolution sol = solve_obstacle(b.spec, gen, noise, {4, 8}, 1e-6);
    REQUIRE(sol.converged);
    REQUIRE(sol.levels.size() == 2);
    REQUIRE(sol.levels[1].distance_to_prev == 0.0);
    REQUIRE(sol.nu().total_mass() == 0.0);
    REQUIRE(sol.final_level().sup_neg_part == 0.0);

    SkorokhodReport rep = skorokhod_check(b.spec, sol.final_level().solution, 8.0,
                                          b.make_levy(0), 200, 2);
    REQUIRE(rep.total_mass == 0.0);
    REQUIRE(rep.grid_pairing == 0.0);
    REQUIRE(rep.grid_flat);
    REQUIRE(rep.pathwise_mean == 0.0);
    REQUIRE(rep.routes_agree);
}

TEST_CASE("adding a constant to periodic terminal data shifts the solution") {
    Grid g = fixtures::periodic_grid();
    TimeGrid tg = fixtures::periodic_times();
    FixtureBundle base = fixtures::periodic_shift(0.0, g, tg);
    FixtureBundle lifted = fixtures::periodic_shift(1.0, g, tg);
    DiscreteGenerator gen = base.make_generator();
    NoisePath noise = sample_noise(tg, 1, 17);

    SpaceTimeField u0 = solve_penalized(base.spec, gen, 0.0, noise).u;
    SpaceTimeField u1 = solve_penalized(lifted.spec, gen, 0.0, noise).u;
    double worst = 0.0;
    for (int k = 0; k < u0.n_frames(); ++k)
        for (int i = 0; i < g.n_x; ++i)
            worst = std::max(worst, std::abs(u1.value(k, i) - u0.value(k, i) - 1.0));
    REQUIRE(worst < 1e-8);
}
