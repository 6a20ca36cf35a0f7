#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "penlab/bdsde.hpp"
#include "penlab/errors.hpp"
#include "penlab/generator.hpp"
#include "penlab/grid.hpp"
#include "penlab/levy.hpp"
#include "penlab/noise.hpp"
#include "penlab/problem.hpp"
#include "penlab/stats.hpp"
#include "penlab/stepper.hpp"

namespace penlab {

/// One penalization level of an obstacle solve.
struct PenalizedLevel {
    double n_level = 0.0;
    PenalizedSolution solution;
    double sup_neg_part = 0.0;      // sup over nodes of (u - v)^-
    double distance_to_prev = 0.0;  // sup-l2 plus energy distance, 0 at first level
};

/// Result of driving the penalization parameter up a schedule until two
/// consecutive solutions agree in the path-space distance.
struct ObstacleSolution {
    std::vector<PenalizedLevel> levels;
    bool converged = false;
    double tolerance = 0.0;

    const PenalizedLevel& final_level() const { return levels.back(); }
    const SpaceTimeField& u() const { return levels.back().solution.u; }
    const RegularMeasure& nu() const { return levels.back().solution.nu; }
};

/// Solves the penalized equation for each n in an increasing schedule and
/// records the inter-level distances; the schedule must respect the
/// monotone-step constraint n * max_dt <= 1 at its largest entry.
inline ObstacleSolution solve_obstacle(const ProblemSpec& spec,
                                       const DiscreteGenerator& gen,
                                       const NoisePath& noise,
                                       const std::vector<double>& schedule,
                                       double tolerance) {
    if (schedule.empty()) throw ConfigError("solve_obstacle: empty schedule");
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i)
        if (!(schedule[i] < schedule[i + 1]))
            throw ConfigError("solve_obstacle: schedule must increase");
    if (!(tolerance > 0.0)) throw ConfigError("solve_obstacle: tolerance must be positive");

    ObstacleSolution out;
    out.tolerance = tolerance;
    for (double n : schedule) {
        PenalizedLevel lvl;
        lvl.n_level = n;
        lvl.solution = solve_penalized(spec, gen, n, noise);
        for (int k = 0; k < lvl.solution.u.n_frames(); ++k)
            for (int i = 0; i < spec.grid.n_x; ++i) {
                double gap = spec.obstacle.value(k, i) - lvl.solution.u.value(k, i);
                lvl.sup_neg_part = std::max(lvl.sup_neg_part, gap);
            }
        lvl.sup_neg_part = std::max(0.0, lvl.sup_neg_part);
        if (!out.levels.empty())
            lvl.distance_to_prev =
                field_distance(gen, out.levels.back().solution.u, lvl.solution.u);
        out.levels.push_back(std::move(lvl));
        if (out.levels.size() >= 2 && out.levels.back().distance_to_prev <= tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

/// Minimality diagnostics for the reflection measure: the measure must
/// charge only the contact region, so its pairing with u - v has to be
/// negligible against total_mass * sup|u - v|, and the pathwise average
/// 2L * E int (Y - S) dK over flat-started paths must agree with the grid
/// pairing within Monte Carlo error.
///
/// The grid pairing evaluates u - v at the node where each interval's
/// deficit was measured (the right node of the interval), which turns it
/// into the exact penalization identity
///   <nu, u - v> = -n sum_k dt h sum_i ((u - v)(k+1, i)^-)^2.
/// The pathwise route accumulates (Y_k - S_k) dK_k with the left-point
/// rule of the path evaluator, which is -n sum ((Y_k - S_k)^-)^2 dt; the
/// two are the same sum shifted by one level, and the shift only
/// contributes the t = 0 term (the terminal deficit vanishes since
/// u_T = Phi >= v_T), so the routes must agree to Monte Carlo error.
struct SkorokhodReport {
    double grid_pairing = 0.0;
    double total_mass = 0.0;
    double sup_gap = 0.0;
    double flatness_bound = 0.0;  // flatness_factor * total_mass * sup_gap
    bool grid_flat = false;
    double pathwise_mean = 0.0;
    double pathwise_std_error = 0.0;
    int n_paths = 0;
    int n_escaped = 0;
    bool routes_agree = false;
};

inline SkorokhodReport skorokhod_check(const ProblemSpec& spec,
                                       const PenalizedSolution& sol,
                                       double n_level, const LevyConfig& config,
                                       int n_paths, std::uint64_t seed,
                                       double flatness_factor = 0.05) {
    const SpaceTimeField& u = sol.u;
    const SpaceTimeField& v = spec.obstacle;
    if (!(config.t_grid == u.times))
        throw RangeError("skorokhod_check: config time grid mismatch");
    if (n_paths < 2) throw ConfigError("skorokhod_check: need paths");

    SkorokhodReport rep;
    rep.total_mass = sol.nu.total_mass();
    rep.grid_pairing = sol.nu.pairing_with(
        [&](int k, int i) { return u.value(k + 1, i) - v.value(k + 1, i); });
    for (int k = 0; k < u.n_frames(); ++k)
        for (int i = 0; i < u.grid.n_x; ++i)
            rep.sup_gap = std::max(rep.sup_gap, std::abs(u.value(k, i) - v.value(k, i)));
    rep.flatness_bound = flatness_factor * rep.total_mass * rep.sup_gap;
    rep.grid_flat = std::abs(rep.grid_pairing) <= rep.flatness_bound;

    PreparedField pf = prepare_field(u);
    PreparedField pv = prepare_field(v);
    LevyConfig c = config;
    c.seed = derive_seed(seed, 14, 0);
    auto start_rng = make_engine(seed, 15, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double L = u.grid.L;
    double vol = 2.0 * L;
    MeanAccumulator acc;
    const TimeGrid& tg = u.times;
    for (int p = 0; p < n_paths; ++p) {
        double x0 = -L + vol * unif(start_rng);
        LevyPath path = sample_path(c, Point{x0, 0.0}, static_cast<std::uint64_t>(p));
        BdsdeSample sm = evaluate_along_path(pf, &pv, n_level, path);
        if (sm.escaped) ++rep.n_escaped;
        double pairing = 0.0;
        for (int k = 0; k + 1 < tg.n_nodes(); ++k) {
            double dk = sm.k[static_cast<std::size_t>(k) + 1] -
                        sm.k[static_cast<std::size_t>(k)];
            if (dk != 0.0)
                pairing += (sm.y[static_cast<std::size_t>(k)] -
                            sm.s[static_cast<std::size_t>(k)]) * dk;
        }
        acc.add(pairing);
    }
    rep.n_paths = n_paths;
    rep.pathwise_mean = vol * acc.mean();
    rep.pathwise_std_error = vol * acc.std_error();
    rep.routes_agree =
        std::abs(rep.pathwise_mean - rep.grid_pairing) <= 3.0 * rep.pathwise_std_error;
    return rep;
}

/// Comparison check between two problems sharing grid, time grid and noise
/// coefficients: with ordered data (terminal values, obstacles, and drift
/// along the first solution) the solutions must stay ordered nodewise.
/// Precondition violations raise ConfigError; the check itself reports the
/// worst ordering violation of the solutions.
struct ComparisonReport {
    double max_violation = 0.0;  // sup (u_a - u_b)^+
    bool ordered = false;
    double tolerance = 0.0;
};

inline ComparisonReport comparison_test(const ProblemSpec& spec_a,
                                        const ProblemSpec& spec_b,
                                        const DiscreteGenerator& gen,
                                        double n_level, const NoisePath& noise,
                                        double tolerance = 1e-10) {
    if (spec_a.grid != spec_b.grid || !(spec_a.times == spec_b.times))
        throw ConfigError("comparison_test: layouts differ");
    if (spec_a.d1 != spec_b.d1) throw ConfigError("comparison_test: noise dimensions differ");
    for (int i = 0; i < spec_a.grid.n_x; ++i)
        if (spec_a.terminal[i] > spec_b.terminal[i] + 1e-12)
            throw ConfigError("comparison_test: terminal values not ordered");
    for (int k = 0; k < spec_a.obstacle.n_frames(); ++k)
        for (int i = 0; i < spec_a.grid.n_x; ++i)
            if (spec_a.obstacle.value(k, i) > spec_b.obstacle.value(k, i) + 1e-12)
                throw ConfigError("comparison_test: obstacles not ordered");

    PenalizedSolution sol_a = solve_penalized(spec_a, gen, n_level, noise);

    // Data ordering along the first solution: f_a <= f_b and h_a = h_b at
    // the arguments the scheme actually uses.
    const TimeGrid& tg = spec_a.times;
    for (int k = 0; k + 1 < tg.n_nodes(); ++k) {
        double t_next = tg.nodes[static_cast<std::size_t>(k) + 1];
        GridFunction frame = sol_a.u.frame(k + 1);
        GridFunction grad = frame.gradient();
        for (int i = 0; i < spec_a.grid.n_x; ++i) {
            double x = spec_a.grid.node(i);
            double y = frame[i];
            double z = grad[i];
            if (spec_a.f(t_next, x, y, z) > spec_b.f(t_next, x, y, z) + 1e-12)
                throw ConfigError("comparison_test: drift not ordered along first solution");
            for (int j = 0; j < spec_a.d1; ++j) {
                double ha = spec_a.h[static_cast<std::size_t>(j)](t_next, x, y, z);
                double hb = spec_b.h[static_cast<std::size_t>(j)](t_next, x, y, z);
                if (std::abs(ha - hb) > 1e-12)
                    throw ConfigError("comparison_test: noise coefficients differ");
            }
        }
    }

    PenalizedSolution sol_b = solve_penalized(spec_b, gen, n_level, noise);
    ComparisonReport rep;
    rep.tolerance = tolerance;
    for (int k = 0; k < sol_a.u.n_frames(); ++k)
        for (int i = 0; i < spec_a.grid.n_x; ++i)
            rep.max_violation = std::max(
                rep.max_violation, sol_a.u.value(k, i) - sol_b.u.value(k, i));
    rep.max_violation = std::max(0.0, rep.max_violation);
    rep.ordered = rep.max_violation <= tolerance;
    return rep;
}

/// Decay of the penalization deficit with the penalization level, measured
/// two ways per level: the grid sup of (u - v)^- and the flat-start Monte
/// Carlo average 2L * E sup_t ((Y_t - S_t)^-)^2 over a fixed path ensemble
/// (shared across levels so the comparison is pathwise).
struct NegPartRow {
    double n_level = 0.0;
    double grid_sup = 0.0;
    double em_value = 0.0;
    double std_error = 0.0;
};

inline std::vector<NegPartRow> negative_part_decay(
    const ProblemSpec& spec, const DiscreteGenerator& gen, const NoisePath& noise,
    const std::vector<double>& levels, const LevyConfig& config, int n_paths,
    std::uint64_t seed) {
    if (n_paths < 2) throw ConfigError("negative_part_decay: need paths");
    LevyConfig c = config;
    c.seed = derive_seed(seed, 16, 0);
    auto start_rng = make_engine(seed, 17, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double L = spec.grid.L;
    double vol = 2.0 * L;

    std::vector<LevyPath> paths;
    paths.reserve(static_cast<std::size_t>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        double x0 = -L + vol * unif(start_rng);
        paths.push_back(sample_path(c, Point{x0, 0.0}, static_cast<std::uint64_t>(p)));
    }
    PreparedField pv = prepare_field(spec.obstacle);

    std::vector<NegPartRow> out;
    out.reserve(levels.size());
    for (double n : levels) {
        PenalizedSolution sol = solve_penalized(spec, gen, n, noise);
        NegPartRow row;
        row.n_level = n;
        for (int k = 0; k < sol.u.n_frames(); ++k)
            for (int i = 0; i < spec.grid.n_x; ++i)
                row.grid_sup = std::max(
                    row.grid_sup, spec.obstacle.value(k, i) - sol.u.value(k, i));
        row.grid_sup = std::max(0.0, row.grid_sup);
        PreparedField pf = prepare_field(sol.u);
        MeanAccumulator acc;
        for (const LevyPath& path : paths) {
            BdsdeSample sm = evaluate_along_path(pf, &pv, n, path);
            double sup2 = 0.0;
            for (std::size_t k = 0; k < sm.y.size(); ++k) {
                double neg = std::max(0.0, sm.s[k] - sm.y[k]);
                sup2 = std::max(sup2, neg * neg);
            }
            acc.add(sup2);
        }
        row.em_value = vol * acc.mean();
        row.std_error = vol * acc.std_error();
        out.push_back(row);
    }
    return out;
}

/// The grouped terms of the discrete weak formulation paired with a test
/// function phi(t, x):
///   <u_0, phi_0> - <Phi, phi_T> + sum <u_{k+1}, dphi_k>
///   + sum dt E(u_k, phi_k) - sum dt <F_{k+1}, phi_k>
///   - sum <H_{k+1}, phi_k> dB_k - <nu, phi> = 0,
/// which the scheme satisfies exactly when dphi_k is the nodal increment
/// phi_{k+1} - phi_k. Passing the analytic time derivative instead uses
/// the midpoint rule dphi_k ~ dt * dphi(t_{k+1/2}), whose defect is
/// O(dt^2) per step.
struct WeakFormTerms {
    double initial = 0.0;
    double terminal = 0.0;
    double time_deriv = 0.0;
    double energy = 0.0;
    double drift = 0.0;
    double noise_term = 0.0;
    double measure = 0.0;

    double residual() const {
        return initial - terminal + time_deriv + energy - drift - noise_term - measure;
    }
    double scale() const {
        double s = std::abs(initial);
        s = std::max(s, std::abs(terminal));
        s = std::max(s, std::abs(time_deriv));
        s = std::max(s, std::abs(energy));
        s = std::max(s, std::abs(drift));
        s = std::max(s, std::abs(noise_term));
        s = std::max(s, std::abs(measure));
        return std::max(s, 1e-300);
    }
};

inline WeakFormTerms weak_form_terms(
    const ProblemSpec& spec, const DiscreteGenerator& gen,
    const PenalizedSolution& sol, const NoisePath& noise,
    const std::function<double(double, double)>& phi,
    const std::function<double(double, double)>* dphi_dt = nullptr) {
    const SpaceTimeField& u = sol.u;
    const Grid& g = spec.grid;
    const TimeGrid& tg = spec.times;
    if (u.grid != gen.grid()) throw RangeError("weak_form_terms: grid mismatch");

    auto phi_frame = [&](double t) {
        GridFunction f(g);
        for (int i = 0; i < g.n_x; ++i) f[i] = phi(t, g.node(i));
        return f;
    };

    WeakFormTerms terms;
    terms.initial = inner(u.frame(0), phi_frame(tg.nodes.front()));
    terms.terminal = inner(spec.terminal, phi_frame(tg.nodes.back()));

    int m = tg.n_intervals();
    for (int k = 0; k < m; ++k) {
        double t_k = tg.nodes[static_cast<std::size_t>(k)];
        double t_next = tg.nodes[static_cast<std::size_t>(k) + 1];
        double dt = tg.dt(k);
        GridFunction phik = phi_frame(t_k);

        GridFunction dphi(g);
        if (dphi_dt) {
            double tm = 0.5 * (t_k + t_next);
            for (int i = 0; i < g.n_x; ++i) dphi[i] = dt * (*dphi_dt)(tm, g.node(i));
        } else {
            GridFunction phin = phi_frame(t_next);
            for (int i = 0; i < g.n_x; ++i) dphi[i] = phin[i] - phik[i];
        }
        terms.time_deriv += inner(u.frame(k + 1), dphi);

        terms.energy += dt * gen.energy(u.frame(k), phik);

        GridFunction frame = u.frame(k + 1);
        GridFunction grad = frame.gradient();
        double drift_k = 0.0;
        std::vector<double> noise_k(static_cast<std::size_t>(spec.d1), 0.0);
        for (int i = 0; i < g.n_x; ++i) {
            double x = g.node(i);
            double y = frame[i];
            double z = grad[i];
            double ph = phik[i];
            drift_k += spec.f(t_next, x, y, z) * ph;
            for (int j = 0; j < spec.d1; ++j)
                noise_k[static_cast<std::size_t>(j)] +=
                    spec.h[static_cast<std::size_t>(j)](t_next, x, y, z) * ph;
        }
        terms.drift += dt * drift_k * g.spacing();
        for (int j = 0; j < spec.d1; ++j)
            terms.noise_term += noise_k[static_cast<std::size_t>(j)] * g.spacing() *
                                noise.increment(k, j);
    }

    terms.measure = sol.nu.pairing(phi);
    return terms;
}

} // namespace penlab
