#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/generator.hpp"
#include "penlab/grid.hpp"
#include "penlab/noise.hpp"
#include "penlab/problem.hpp"

namespace penlab {

/// Penalty mass accumulated per (time interval, cell):
///   mass[k][i] = n (u_{k+1} - v_{k+1})^-(x_i) * dt_k * h.
/// This is the discrete reflection measure nu of the penalized scheme; the
/// deficit is read at the later time level (where the stepper applied it)
/// and attributed to the interval [t_k, t_{k+1}).
struct RegularMeasure {
    TimeGrid times;
    Grid grid;
    std::vector<std::vector<double>> cell_mass; // [interval][node]

    RegularMeasure() = default;
    RegularMeasure(const TimeGrid& tg, const Grid& g)
        : times(tg), grid(g),
          cell_mass(static_cast<std::size_t>(tg.n_intervals()),
                    std::vector<double>(static_cast<std::size_t>(g.n_x), 0.0)) {}

    double total_mass() const {
        double s = 0.0;
        for (const auto& row : cell_mass)
            for (double m : row) s += m;
        return s;
    }

    /// Pairing with a cell-wise evaluator; k is the interval index.
    double pairing_with(const std::function<double(int k, int i)>& phi) const {
        double s = 0.0;
        for (int k = 0; k < static_cast<int>(cell_mass.size()); ++k)
            for (int i = 0; i < grid.n_x; ++i) {
                double m = cell_mass[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
                if (m != 0.0) s += m * phi(k, i);
            }
        return s;
    }

    /// Pairing with a test function evaluated at the left node of each
    /// interval (the convention that reproduces the discrete weak form).
    double pairing(const std::function<double(double t, double x)>& phi) const {
        return pairing_with([&](int k, int i) {
            return phi(times.nodes[static_cast<std::size_t>(k)], grid.node(i));
        });
    }
};

/// Reusable backward Euler solver for a fixed (generator, dt, damping):
/// factors (I - dt A + dt damping) once.
class ImplicitStep {
public:
    ImplicitStep(const DiscreteGenerator& gen, double dt, double damping = 0.0)
        : gen_(&gen), dt_(dt), damping_(damping) {
        if (!(dt > 0.0)) throw ConfigError("ImplicitStep: dt must be positive");
        int n = gen.grid().n_x;
        Eigen::MatrixXd M = -dt * gen.matrix();
        M.diagonal().array() += 1.0 + dt * damping;
        llt_.compute(M);
        if (llt_.info() != Eigen::Success)
            throw ConfigError("ImplicitStep: factorization failed");
        (void)n;
    }

    double dt() const { return dt_; }
    double damping() const { return damping_; }

    GridFunction solve(const GridFunction& rhs) const {
        Eigen::Map<const Eigen::VectorXd> r(rhs.v.data(), rhs.size());
        Eigen::VectorXd u = llt_.solve(r);
        GridFunction out(rhs.grid);
        Eigen::Map<Eigen::VectorXd>(out.v.data(), out.size()) = u;
        return out;
    }

private:
    const DiscreteGenerator* gen_;
    double dt_;
    double damping_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {

/// Explicit part of one backward step: rhs = u_next + dt [f + n (u_next - v)^-]
/// + h dB, everything evaluated at the later time level t_next = t + dt with
/// the gradient of u_next by centered differences (backward Ito convention).
/// Returns the rhs and, when mass_out is non-null, the per-node penalty
/// deficit n (u_next - v)^-.
inline GridFunction explicit_rhs(const GridFunction& u_next, const ProblemSpec& spec,
                                 double n_level, double t_next, double dt,
                                 const std::vector<double>& dB,
                                 const std::vector<double>& v_next,
                                 std::vector<double>* deficit_out) {
    GridFunction grad = u_next.gradient();
    GridFunction rhs(u_next.grid);
    int n = u_next.size();
    for (int i = 0; i < n; ++i) {
        double x = u_next.grid.node(i);
        double y = u_next[i];
        double z = grad[i];
        double pen = n_level > 0.0
                         ? n_level * std::max(0.0, v_next[static_cast<std::size_t>(i)] - y)
                         : 0.0;
        double drift = spec.f(t_next, x, y, z) + pen;
        double noise = 0.0;
        for (int j = 0; j < spec.d1; ++j)
            noise += spec.h[static_cast<std::size_t>(j)](t_next, x, y, z) *
                     dB[static_cast<std::size_t>(j)];
        rhs[i] = y + dt * drift + noise;
        if (deficit_out) (*deficit_out)[static_cast<std::size_t>(i)] = pen;
    }
    return rhs;
}

} // namespace detail

/// One backward Euler step of the penalized equation from t + dt to t:
/// implicit in the generator, explicit (at the later level) in f, penalty
/// and noise. dB holds the noise increments over [t, t + dt].
inline GridFunction step_backward_penalized(const GridFunction& u_next,
                                            const ProblemSpec& spec,
                                            const DiscreteGenerator& gen,
                                            double n_level, double t, double dt,
                                            const std::vector<double>& dB) {
    if (u_next.grid != gen.grid()) throw RangeError("step: grid mismatch");
    if (!(dt > 0.0)) throw RangeError("step: dt must be positive");
    if (n_level < 0.0) throw ConfigError("step: penalty level must be >= 0");
    if (n_level * dt > 1.0 + 1e-12)
        throw ConfigError("step: penalty level violates n * dt <= 1");
    if (static_cast<int>(dB.size()) != spec.d1)
        throw RangeError("step: noise increment dimension mismatch");
    double t_next = t + dt;
    int k_next = spec.times.index_of(t_next);
    ImplicitStep im(gen, dt);
    GridFunction rhs = detail::explicit_rhs(u_next, spec, n_level, t_next, dt, dB,
                                            spec.obstacle.frames[static_cast<std::size_t>(k_next)],
                                            nullptr);
    return im.solve(rhs);
}

/// Full backward sweep of the penalized equation at one penalty level.
struct PenalizedSolution {
    SpaceTimeField u;
    RegularMeasure nu;
};

inline PenalizedSolution solve_penalized(const ProblemSpec& spec,
                                         const DiscreteGenerator& gen,
                                         double n_level, const NoisePath& noise) {
    spec.validate();
    if (spec.grid != gen.grid()) throw ConfigError("solve_penalized: grid mismatch");
    if (!(noise.times == spec.times))
        throw ConfigError("solve_penalized: noise grid mismatch");
    if (noise.d1 != spec.d1) throw ConfigError("solve_penalized: noise dimension mismatch");
    if (n_level < 0.0) throw ConfigError("solve_penalized: penalty level must be >= 0");
    if (n_level * spec.times.max_dt() > 1.0 + 1e-12)
        throw ConfigError("solve_penalized: penalty level violates n * dt <= 1");

    int nk = spec.times.n_intervals();
    PenalizedSolution out;
    out.u = SpaceTimeField(spec.times, spec.grid);
    out.nu = RegularMeasure(spec.times, spec.grid);
    out.u.set_frame(nk, spec.terminal);

    double h = spec.grid.spacing();
    double dt_cached = -1.0;
    std::unique_ptr<ImplicitStep> im;
    std::vector<double> deficit(static_cast<std::size_t>(spec.grid.n_x), 0.0);
    GridFunction u_next = spec.terminal;
    for (int k = nk - 1; k >= 0; --k) {
        double dt = spec.times.dt(k);
        if (dt != dt_cached) {
            im = std::make_unique<ImplicitStep>(gen, dt);
            dt_cached = dt;
        }
        double t_next = spec.times.nodes[static_cast<std::size_t>(k) + 1];
        GridFunction rhs = detail::explicit_rhs(
            u_next, spec, n_level, t_next, dt, noise.increments[static_cast<std::size_t>(k)],
            spec.obstacle.frames[static_cast<std::size_t>(k) + 1], &deficit);
        for (int i = 0; i < spec.grid.n_x; ++i)
            out.nu.cell_mass[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                deficit[static_cast<std::size_t>(i)] * dt * h;
        u_next = im->solve(rhs);
        out.u.set_frame(k, u_next);
    }
    return out;
}

/// Backward sweep of the linear damped equation
///   du + [A u - damping * u + f(t,x)] dt + h(t,x) dB = 0, u_T = terminal,
/// used by the deterministic/stochastic coefficient-decay fixtures.
inline SpaceTimeField solve_damped(const DiscreteGenerator& gen, const TimeGrid& times,
                                   double damping,
                                   const std::function<double(double, double)>& f,
                                   const std::vector<std::function<double(double, double)>>& h,
                                   const NoisePath* noise,
                                   const GridFunction& terminal) {
    times.validate();
    if (terminal.grid != gen.grid()) throw ConfigError("solve_damped: grid mismatch");
    if (damping < 0.0) throw ConfigError("solve_damped: damping must be >= 0");
    if (noise && !(noise->times == times))
        throw ConfigError("solve_damped: noise grid mismatch");
    if (noise && static_cast<int>(h.size()) != noise->d1)
        throw ConfigError("solve_damped: h / noise dimension mismatch");

    int nk = times.n_intervals();
    SpaceTimeField u(times, gen.grid());
    u.set_frame(nk, terminal);
    double dt_cached = -1.0;
    std::unique_ptr<ImplicitStep> im;
    GridFunction u_next = terminal;
    for (int k = nk - 1; k >= 0; --k) {
        double dt = times.dt(k);
        if (dt != dt_cached) {
            im = std::make_unique<ImplicitStep>(gen, dt, damping);
            dt_cached = dt;
        }
        double t_next = times.nodes[static_cast<std::size_t>(k) + 1];
        GridFunction rhs(gen.grid());
        for (int i = 0; i < gen.grid().n_x; ++i) {
            double x = gen.grid().node(i);
            double val = u_next[i] + dt * (f ? f(t_next, x) : 0.0);
            if (noise)
                for (int j = 0; j < noise->d1; ++j)
                    val += h[static_cast<std::size_t>(j)](t_next, x) * noise->increment(k, j);
            rhs[i] = val;
        }
        u_next = im->solve(rhs);
        u.set_frame(k, u_next);
    }
    return u;
}

} // namespace penlab
