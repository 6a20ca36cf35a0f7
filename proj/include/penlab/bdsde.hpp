#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/generator.hpp"
#include "penlab/grid.hpp"
#include "penlab/levy.hpp"
#include "penlab/noise.hpp"
#include "penlab/problem.hpp"
#include "penlab/stats.hpp"

namespace penlab {

/// Space-time field unpacked into per-frame grid functions, with nodal
/// gradients (and optionally the jump operator applied per frame)
/// precomputed once, so evaluating many paths against the same field does
/// no per-path frame copies.
struct PreparedField {
    TimeGrid times;
    Grid grid;
    std::vector<GridFunction> value;
    std::vector<GridFunction> grad;       // centered-difference gradient per frame
    std::vector<GridFunction> jump_part;  // J u_k per frame, empty unless requested
};

inline PreparedField prepare_field(const SpaceTimeField& field,
                                   const DiscreteGenerator* gen = nullptr) {
    PreparedField p;
    p.times = field.times;
    p.grid = field.grid;
    p.value.reserve(static_cast<std::size_t>(field.n_frames()));
    p.grad.reserve(static_cast<std::size_t>(field.n_frames()));
    for (int k = 0; k < field.n_frames(); ++k) {
        p.value.push_back(field.frame(k));
        p.grad.push_back(p.value.back().gradient());
    }
    if (gen) {
        if (gen->grid() != field.grid)
            throw RangeError("prepare_field: generator grid mismatch");
        p.jump_part.reserve(static_cast<std::size_t>(field.n_frames()));
        for (int k = 0; k < field.n_frames(); ++k)
            p.jump_part.push_back(gen->apply_jump(p.value[static_cast<std::size_t>(k)]));
    }
    return p;
}

/// The quadruple (Y, Z, U, K) of one path evaluated against a field:
///   Y_k = u(t_k, X_k)     (linear interpolation, zero outside the box)
///   Z_k = Du(t_k, X_k)    (interpolated centered-difference gradient)
///   U   = u(t_k, X_- + z) - u(t_k, X_-) per jump, with the field frozen
///         at the left time node of the jump's interval
///   K_k = n sum_{j<k} (Y_j - S_j)^- dt_j   (left-point rule)
/// A path is flagged escaped at the first grid node outside [-L, L];
/// zero-extension reads make every later value 0, which is the killed
/// process convention matching the zero-extension generator.
struct BdsdeSample {
    std::vector<double> x;  // position at time nodes
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> s;  // obstacle along the path
    std::vector<double> k;  // reflection process
    struct JumpEval {
        int interval = 0;
        double t = 0.0;
        double x_pre = 0.0;
        double size = 0.0;
        double u_diff = 0.0;
    };
    std::vector<JumpEval> jumps;
    bool escaped = false;
    int first_exit = -1;
};

inline BdsdeSample evaluate_along_path(const PreparedField& pf,
                                       const PreparedField* obstacle,
                                       double n_level, const LevyPath& path) {
    if (path.config.d != 1)
        throw ConfigError("evaluate_along_path: path evaluation requires d = 1");
    if (!(path.config.t_grid == pf.times))
        throw RangeError("evaluate_along_path: path and field time grids differ");
    if (obstacle && (obstacle->grid != pf.grid || !(obstacle->times == pf.times)))
        throw RangeError("evaluate_along_path: obstacle layout mismatch");

    int nk = pf.times.n_nodes();
    BdsdeSample out;
    out.x.resize(static_cast<std::size_t>(nk));
    out.y.resize(static_cast<std::size_t>(nk));
    out.z.resize(static_cast<std::size_t>(nk));
    out.s.assign(static_cast<std::size_t>(nk), 0.0);
    out.k.assign(static_cast<std::size_t>(nk), 0.0);

    double L = pf.grid.L;
    for (int kk = 0; kk < nk; ++kk) {
        double t = pf.times.nodes[static_cast<std::size_t>(kk)];
        double xt = position(path, t).x;
        out.x[static_cast<std::size_t>(kk)] = xt;
        if (std::abs(xt) > L && out.first_exit < 0) {
            out.escaped = true;
            out.first_exit = kk;
        }
        out.y[static_cast<std::size_t>(kk)] =
            pf.value[static_cast<std::size_t>(kk)].interpolate(xt);
        out.z[static_cast<std::size_t>(kk)] =
            pf.grad[static_cast<std::size_t>(kk)].interpolate(xt);
        if (obstacle)
            out.s[static_cast<std::size_t>(kk)] =
                obstacle->value[static_cast<std::size_t>(kk)].interpolate(xt);
    }
    if (obstacle && n_level > 0.0) {
        for (int kk = 0; kk + 1 < nk; ++kk) {
            double deficit = std::max(0.0, out.s[static_cast<std::size_t>(kk)] -
                                               out.y[static_cast<std::size_t>(kk)]);
            out.k[static_cast<std::size_t>(kk) + 1] =
                out.k[static_cast<std::size_t>(kk)] +
                n_level * deficit * pf.times.dt(kk);
        }
    }

    out.jumps.reserve(path.jumps.size());
    for (const auto& j : path.jumps) {
        if (j.t <= 0.0 || j.t > pf.times.T()) continue;
        // interval index k with t_k < t <= t_{k+1}
        int kk = 0;
        {
            const auto& tn = pf.times.nodes;
            int lo = 0, hi = pf.times.n_intervals() - 1;
            while (lo < hi) {
                int mid = (lo + hi) / 2;
                if (tn[static_cast<std::size_t>(mid) + 1] < j.t) lo = mid + 1; else hi = mid;
            }
            kk = lo;
        }
        double x_pre = left_limit(path, j.t).x;
        const GridFunction& frame = pf.value[static_cast<std::size_t>(kk)];
        BdsdeSample::JumpEval je;
        je.interval = kk;
        je.t = j.t;
        je.x_pre = x_pre;
        je.size = j.z.x;
        je.u_diff = frame.interpolate(x_pre + j.z.x) - frame.interpolate(x_pre);
        out.jumps.push_back(je);
    }
    return out;
}

/// Statistics of the representation residual over one (s, t) window.
struct ResidualStat {
    double s = 0.0;
    double t = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    int n_used = 0;
    int n_escaped = 0;
};

/// Monte Carlo check of the stochastic representation: along each path the
/// increment of u plus the drift and backward-noise integrals must be
/// balanced by the forward martingale reconstructed from Z and the
/// compensated jumps,
///   R = u(t,X_t) - u(s,X_s) + int f dr + int h dB
///       - sum Z dW - [sum U - int (J u)(X_r) dr].
/// Quadratures mirror the stepper: f and h at the later time level and the
/// frozen left position, Z at the left node, the jump compensator by the
/// position trapezoid with the field frozen at the left node. Escaped
/// paths are excluded from the averages (their count is reported). Under
/// the killed truncated-jump dynamics E R = O(dt^2 + h^2) per unit time,
/// so the mean over paths must vanish within Monte Carlo error.
inline std::vector<ResidualStat> representation_residual(
    const PreparedField& pf, const ProblemSpec& spec, const NoisePath& noise,
    const LevyConfig& config, const std::vector<std::pair<double, double>>& windows,
    int n_paths, std::uint64_t seed) {
    if (pf.jump_part.empty())
        throw RangeError("representation_residual: field must be prepared with the generator");
    if (!(config.t_grid == pf.times))
        throw RangeError("representation_residual: config time grid mismatch");
    if (!(noise.times == pf.times))
        throw RangeError("representation_residual: noise grid mismatch");
    if (n_paths < 2) throw ConfigError("representation_residual: need paths");

    const TimeGrid& tg = pf.times;
    std::vector<std::pair<int, int>> idx;
    idx.reserve(windows.size());
    for (auto [a, b] : windows) {
        int ka = tg.index_of(a);
        int kb = tg.index_of(b);
        if (ka >= kb) throw RangeError("representation_residual: need s < t");
        idx.emplace_back(ka, kb);
    }

    LevyConfig c = config;
    c.seed = derive_seed(seed, 10, 0);
    auto start_rng = make_engine(seed, 11, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double L = pf.grid.L;

    std::vector<MeanAccumulator> acc(windows.size());
    int n_escaped = 0;
    int m = tg.n_intervals();
    std::vector<double> inc(static_cast<std::size_t>(m), 0.0);
    std::vector<double> jump_sum(static_cast<std::size_t>(m), 0.0);
    for (int p = 0; p < n_paths; ++p) {
        double x0 = -L + 2.0 * L * unif(start_rng);
        LevyPath path = sample_path(c, Point{x0, 0.0}, static_cast<std::uint64_t>(p));
        BdsdeSample sm = evaluate_along_path(pf, nullptr, 0.0, path);
        if (sm.escaped) {
            ++n_escaped;
            continue;
        }
        for (int k = 0; k < m; ++k) {
            double dt = tg.dt(k);
            double t_next = tg.nodes[static_cast<std::size_t>(k) + 1];
            double xk = sm.x[static_cast<std::size_t>(k)];
            double xk1 = sm.x[static_cast<std::size_t>(k) + 1];
            double y_next = pf.value[static_cast<std::size_t>(k) + 1].interpolate(xk);
            double z_next = pf.grad[static_cast<std::size_t>(k) + 1].interpolate(xk);

            double drift = spec.f(t_next, xk, y_next, z_next) * dt;
            double bnoise = 0.0;
            for (int j = 0; j < spec.d1; ++j)
                bnoise += spec.h[static_cast<std::size_t>(j)](t_next, xk, y_next, z_next) *
                          noise.increment(k, j);
            double zmart = sm.z[static_cast<std::size_t>(k)] *
                           path.increments[static_cast<std::size_t>(k)].x;
            double comp = 0.5 * dt *
                          (pf.jump_part[static_cast<std::size_t>(k)].interpolate(xk) +
                           pf.jump_part[static_cast<std::size_t>(k)].interpolate(xk1));
            inc[static_cast<std::size_t>(k)] =
                sm.y[static_cast<std::size_t>(k) + 1] - sm.y[static_cast<std::size_t>(k)] +
                drift + bnoise - zmart + comp;
        }
        std::fill(jump_sum.begin(), jump_sum.end(), 0.0);
        for (const auto& je : sm.jumps)
            jump_sum[static_cast<std::size_t>(je.interval)] += je.u_diff;
        for (std::size_t w = 0; w < idx.size(); ++w) {
            double r = 0.0;
            for (int k = idx[w].first; k < idx[w].second; ++k)
                r += inc[static_cast<std::size_t>(k)] - jump_sum[static_cast<std::size_t>(k)];
            acc[w].add(r);
        }
    }

    std::vector<ResidualStat> out(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) {
        out[w].s = windows[w].first;
        out[w].t = windows[w].second;
        out[w].mean = acc[w].mean();
        out[w].std_error = acc[w].std_error();
        out[w].n_used = static_cast<int>(acc[w].count());
        out[w].n_escaped = n_escaped;
    }
    return out;
}

/// One row of the energy identity check at time t:
///   lhs = ||u_t||_2^2 + int_t^T E(u_s) ds   (grid quadrature)
///   rhs = E^m (A_T - A_t)^2                 (Monte Carlo, A_t = int_0^t f(s,X_s) ds)
/// with E^m realized as 2L times the uniform-start average; paths are
/// retained after exit with the integrand read as 0 from the first node
/// outside the box (killed convention).
struct EnergyCheckRow {
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double std_error = 0.0;
    double rel_gap = 0.0;
    int n_paths = 0;
    int n_escaped = 0;
};

inline std::vector<EnergyCheckRow> energy_identity_check(
    const SpaceTimeField& u, const DiscreteGenerator& gen,
    const std::function<double(double, double)>& f, const LevyConfig& config,
    const std::vector<double>& ts, int n_paths, std::uint64_t seed) {
    if (u.grid != gen.grid()) throw RangeError("energy_identity_check: grid mismatch");
    if (!(config.t_grid == u.times))
        throw RangeError("energy_identity_check: config time grid mismatch");
    if (n_paths < 2) throw ConfigError("energy_identity_check: need paths");

    const TimeGrid& tg = u.times;
    double L = u.grid.L;
    double vol = 2.0 * L;
    std::vector<int> kts;
    kts.reserve(ts.size());
    for (double t : ts) kts.push_back(tg.index_of(t));

    LevyConfig c = config;
    c.seed = derive_seed(seed, 12, 0);
    auto start_rng = make_engine(seed, 13, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<MeanAccumulator> acc(ts.size());
    int n_escaped = 0;
    int m = tg.n_intervals();
    for (int p = 0; p < n_paths; ++p) {
        double x0 = -L + vol * unif(start_rng);
        LevyPath path = sample_path(c, Point{x0, 0.0}, static_cast<std::uint64_t>(p));
        bool escaped = false;
        bool alive = true;
        // A increments by the left rule, f read as 0 once the path exits.
        std::vector<double> a_nodes(static_cast<std::size_t>(m) + 1, 0.0);
        for (int k = 0; k < m; ++k) {
            double t = tg.nodes[static_cast<std::size_t>(k)];
            double x = position(path, t).x;
            if (std::abs(x) > L) {
                alive = false;
                escaped = true;
            }
            double fk = alive ? f(t, x) : 0.0;
            a_nodes[static_cast<std::size_t>(k) + 1] =
                a_nodes[static_cast<std::size_t>(k)] + fk * tg.dt(k);
        }
        if (escaped) ++n_escaped;
        for (std::size_t w = 0; w < kts.size(); ++w) {
            double d = a_nodes[static_cast<std::size_t>(m)] -
                       a_nodes[static_cast<std::size_t>(kts[w])];
            acc[w].add(d * d);
        }
    }

    std::vector<EnergyCheckRow> out(ts.size());
    for (std::size_t w = 0; w < ts.size(); ++w) {
        int kt = kts[w];
        double lhs = 0.0;
        {
            GridFunction ut = u.frame(kt);
            double nrm = ut.l2_norm();
            lhs = nrm * nrm + energy_time_integral(gen, u, kt);
        }
        double rhs = vol * acc[w].mean();
        out[w].t = ts[w];
        out[w].lhs = lhs;
        out[w].rhs = rhs;
        out[w].std_error = vol * acc[w].std_error();
        out[w].rel_gap = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        out[w].n_paths = n_paths;
        out[w].n_escaped = n_escaped;
    }
    return out;
}

} // namespace penlab
