#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "penlab/bdsde.hpp"
#include "penlab/fixtures.hpp"
#include "penlab/generator.hpp"
#include "penlab/noise.hpp"
#include "penlab/stepper.hpp"

using namespace penlab;

namespace {

/// Hand-built path: no Brownian motion, one jump of size 2 at t = 0.3.
LevyPath manual_path(const TimeGrid& tg, double x0) {
    LevyPath p;
    p.config.d = 1;
    p.config.alpha = 1.0;
    p.config.eps_trunc = 1.0;
    p.config.z_max = 3.0;
    p.config.t_grid = tg;
    p.x0 = Point{x0, 0.0};
    p.increments.assign(static_cast<std::size_t>(tg.n_intervals()), Point{});
    p.w_nodes.assign(static_cast<std::size_t>(tg.n_nodes()), Point{});
    p.jumps = {Jump{0.3, Point{2.0, 0.0}}};
    p.jump_prefix = {Point{}, Point{2.0, 0.0}};
    return p;
}

/// Field u(t, x) = x at every time node.
SpaceTimeField linear_field(const TimeGrid& tg, const Grid& g) {
    SpaceTimeField u(tg, g);
    for (int k = 0; k < u.n_frames(); ++k)
        for (int i = 0; i < g.n_x; ++i) u.value(k, i) = g.node(i);
    return u;
}

} // namespace

TEST_CASE("prepared fields cache values, gradients and the jump part") {
    Grid g{5.0, 33, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(1.0, 4);
    DiscreteGenerator gen(g, 1.0, 1.0, 2.0);
    SpaceTimeField u(tg, g);
    for (int k = 0; k < u.n_frames(); ++k)
        for (int i = 0; i < g.n_x; ++i) {
            double x = g.node(i);
            u.value(k, i) = (1.0 + 0.1 * k) * std::exp(-x * x);
        }

    PreparedField pf = prepare_field(u, &gen);
    REQUIRE(pf.value.size() == 5);
    REQUIRE(pf.jump_part.size() == 5);
    for (int k = 0; k < 5; ++k) {
        GridFunction want_grad = u.frame(k).gradient();
        GridFunction want_jump = gen.apply_jump(u.frame(k));
        for (int i = 0; i < g.n_x; ++i) {
            REQUIRE(pf.value[static_cast<std::size_t>(k)][i] == u.value(k, i));
            REQUIRE(pf.grad[static_cast<std::size_t>(k)][i] == want_grad[i]);
            REQUIRE(pf.jump_part[static_cast<std::size_t>(k)][i] == want_jump[i]);
        }
    }

    PreparedField bare = prepare_field(u);
    REQUIRE(bare.jump_part.empty());
    DiscreteGenerator other(Grid{4.0, 33, BoundaryRule::ZeroExtension}, 1.0, 1.0, 2.0);
    REQUIRE_THROWS_AS(prepare_field(u, &other), RangeError);
}

TEST_CASE("path evaluation: values, gradient, jumps, reflection accrual") {
    Grid g{5.0, 41, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(1.0, 10);
    SpaceTimeField u = linear_field(tg, g);
    PreparedField pf = prepare_field(u);

    // Obstacle exactly one unit above the field.
    SpaceTimeField v(tg, g);
    for (int k = 0; k < v.n_frames(); ++k)
        for (int i = 0; i < g.n_x; ++i) v.value(k, i) = g.node(i) + 1.0;
    PreparedField pv = prepare_field(v);

    LevyPath path = manual_path(tg, 1.0);
    BdsdeSample sm = evaluate_along_path(pf, &pv, 1.0, path);

    REQUIRE_FALSE(sm.escaped);
    // Before the jump the path sits at 1, after it at 3; u(t,x) = x.
    REQUIRE(sm.y[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sm.y[2] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sm.y[3] == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(sm.y[10] == Catch::Approx(3.0).margin(1e-12));
    // The gradient of x is 1 wherever the stencil stays inside the box.
    REQUIRE(sm.z[0] == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sm.z[5] == Catch::Approx(1.0).margin(1e-12));
    // Obstacle gap is constant 1, so K accrues n * t by the left rule.
    for (int k = 0; k <= 10; ++k)
        REQUIRE(sm.k[static_cast<std::size_t>(k)] ==
                Catch::Approx(tg.nodes[static_cast<std::size_t>(k)]).margin(1e-12));

    // The jump at t = 0.3 lands in the interval (0.2, 0.3] and moves u by
    // its size along the linear field.
    REQUIRE(sm.jumps.size() == 1);
    REQUIRE(sm.jumps[0].interval == 2);
    REQUIRE(sm.jumps[0].x_pre == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sm.jumps[0].u_diff == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("paths leaving the box are flagged and read zero") {
    Grid g{1.0, 11, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(1.0, 4);
    SpaceTimeField u(tg, g, 1.0); // constant 1 inside the box
    PreparedField pf = prepare_field(u);

    LevyPath path = manual_path(tg, 5.0);
    BdsdeSample sm = evaluate_along_path(pf, nullptr, 0.0, path);
    REQUIRE(sm.escaped);
    REQUIRE(sm.first_exit == 0);
    REQUIRE(sm.y[0] == 0.0);

    LevyPath inside = manual_path(tg, 0.0); // jumps to 2.0 at t = 0.3
    BdsdeSample sm2 = evaluate_along_path(pf, nullptr, 0.0, inside);
    REQUIRE(sm2.escaped);
    REQUIRE(sm2.first_exit == 2); // first node with |x| > 1 is t = 0.5? no: t_2 = 0.5
    REQUIRE(sm2.y[0] == 1.0);
    REQUIRE(sm2.y[3] == 0.0);
}

TEST_CASE("path evaluation guards") {
    Grid g{5.0, 33, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(1.0, 4);
    SpaceTimeField u(tg, g);
    PreparedField pf = prepare_field(u);

    LevyPath wrong_d = manual_path(tg, 0.0);
    wrong_d.config.d = 2;
    REQUIRE_THROWS_AS(evaluate_along_path(pf, nullptr, 0.0, wrong_d), ConfigError);

    LevyPath wrong_grid = manual_path(TimeGrid::uniform(1.0, 5), 0.0);
    REQUIRE_THROWS_AS(evaluate_along_path(pf, nullptr, 0.0, wrong_grid), RangeError);

    SpaceTimeField v(TimeGrid::uniform(1.0, 5), g);
    PreparedField pv = prepare_field(v);
    LevyPath ok = manual_path(tg, 0.0);
    REQUIRE_THROWS_AS(evaluate_along_path(pf, &pv, 1.0, ok), RangeError);
}

TEST_CASE("representation residual vanishes within Monte Carlo error") {
    Grid g{14.0, 129, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::linear_smooth(fixtures::LinearVariant::Noisy, g, tg);
    DiscreteGenerator gen = b.make_generator();
    NoisePath noise = sample_noise(tg, 1, 314);
    PenalizedSolution s = solve_penalized(b.spec, gen, 0.0, noise);
    PreparedField pf = prepare_field(s.u, &gen);

    std::vector<std::pair<double, double>> windows = {
        {0.0, 0.5}, {0.0, 0.25}, {0.25, 0.5}, {0.125, 0.375}};
    auto stats = representation_residual(pf, b.spec, noise, b.make_levy(0), windows,
                                         2000, 2025);
    REQUIRE(stats.size() == windows.size());
    for (const auto& r : stats) {
        INFO("window (" << r.s << ", " << r.t << "): mean = " << r.mean
                        << ", se = " << r.std_error << ", used " << r.n_used);
        REQUIRE(r.n_used + r.n_escaped == 2000);
        REQUIRE(r.n_used > 1500);
        REQUIRE(r.std_error > 0.0);
        REQUIRE(std::abs(r.mean) <= 3.0 * r.std_error);
    }

    PreparedField bare = prepare_field(s.u);
    REQUIRE_THROWS_AS(representation_residual(bare, b.spec, noise, b.make_levy(0),
                                              windows, 100, 1),
                      RangeError);
    REQUIRE_THROWS_AS(representation_residual(pf, b.spec, noise, b.make_levy(0),
                                              {{0.25, 0.25}}, 100, 1),
                      RangeError);
    REQUIRE_THROWS_AS(representation_residual(pf, b.spec, noise, b.make_levy(0),
                                              windows, 1, 1),
                      ConfigError);
}

TEST_CASE("energy identity holds for the potential fixture") {
    Grid g{14.0, 129, BoundaryRule::ZeroExtension};
    TimeGrid tg = TimeGrid::uniform(0.5, 64);
    FixtureBundle b = fixtures::linear_smooth(fixtures::LinearVariant::Potential, g, tg);
    DiscreteGenerator gen = b.make_generator();
    PenalizedSolution s = solve_penalized(b.spec, gen, 0.0, NoisePath::zero(tg, 1));

    auto f = [](double t, double x) { return (0.5 + 0.5 * t) * std::exp(-x * x / 8.0); };
    auto rows = energy_identity_check(s.u, gen, f, b.make_levy(0), {0.0, 0.25},
                                      4000, 77);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        INFO("t = " << r.t << ": lhs = " << r.lhs << ", rhs = " << r.rhs
                    << " +- " << r.std_error);
        REQUIRE(r.lhs > 0.0);
        REQUIRE(r.rhs > 0.0);
        REQUIRE(r.rel_gap < 0.1);
        REQUIRE(r.n_paths == 4000);
    }
    // The t = 0 window contains the t = T/2 one, so its square mean is larger.
    REQUIRE(rows[0].rhs > rows[1].rhs);

    REQUIRE_THROWS_AS(energy_identity_check(s.u, gen, f, b.make_levy(0), {0.0}, 1, 1),
                      ConfigError);
}
