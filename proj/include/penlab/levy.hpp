#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/grid.hpp"
#include "penlab/rng.hpp"
#include "penlab/stats.hpp"

namespace penlab {

/// Point in dimension 1 or 2; the second coordinate is exactly 0 when d = 1.
struct Point {
    double x = 0.0;
    double y = 0.0;
    double norm() const { return std::hypot(x, y); }
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }

/// Configuration of the simulated Markov process X = W + compensated-free
/// jump part with kernel |z|^-(d+alpha) truncated to eps_trunc <= |z| <= z_max.
/// The kernel is symmetric, so no drift compensation is applied to the
/// truncated small jumps (principal-value convention).
struct LevyConfig {
    int d = 1;
    double alpha = 1.0;
    double eps_trunc = 1.0;
    double z_max = 10.0;
    TimeGrid t_grid;
    std::uint64_t seed = 0;

    void validate() const {
        if (d != 1 && d != 2) throw ConfigError("LevyConfig: d must be 1 or 2");
        if (!(alpha > 0.0 && alpha < 2.0))
            throw ConfigError("LevyConfig: alpha must lie in (0, 2)");
        if (!(eps_trunc > 0.0)) throw ConfigError("LevyConfig: eps_trunc must be positive");
        if (!(z_max > eps_trunc)) throw ConfigError("LevyConfig: need z_max > eps_trunc");
        if (t_grid.nodes.empty()) throw ConfigError("LevyConfig: empty time grid");
        t_grid.validate();
    }
};

/// Total rate of jumps with |z| > r under the truncated kernel,
/// S_{d-1} * (r^-alpha - z_max^-alpha) / alpha with S_0 = 2, S_1 = 2*pi.
inline double jump_rate(const LevyConfig& c, double r) {
    if (r < c.eps_trunc || r >= c.z_max)
        throw RangeError("jump_rate: r must lie in [eps_trunc, z_max)");
    double surface = c.d == 1 ? 2.0 : 2.0 * M_PI;
    return surface * (std::pow(r, -c.alpha) - std::pow(c.z_max, -c.alpha)) / c.alpha;
}

struct Jump {
    double t = 0.0;
    Point z;
};

/// One sampled trajectory: Brownian increments per grid interval plus the
/// exact jump times and sizes. Cumulative sums are cached so position
/// queries are O(log n).
struct LevyPath {
    LevyConfig config;
    Point x0;
    std::uint64_t path_index = 0;
    std::vector<Point> increments;  // per time-grid interval
    std::vector<Jump> jumps;        // sorted by time, times in (0, T]
    std::vector<Point> w_nodes;     // Brownian position at each time node
    std::vector<Point> jump_prefix; // jump_prefix[j] = sum of first j jump sizes

    /// Brownian value at t, linear between grid nodes.
    Point brownian(double t) const {
        const auto& tn = config.t_grid.nodes;
        if (t < 0.0 || t > tn.back() * (1.0 + 1e-12))
            throw RangeError("LevyPath: t outside [0, T]");
        t = std::min(t, tn.back());
        auto it = std::upper_bound(tn.begin(), tn.end(), t);
        std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            0, (it - tn.begin()) - 1));
        if (k + 1 >= tn.size()) return w_nodes.back();
        double w = (t - tn[k]) / (tn[k + 1] - tn[k]);
        return {(1.0 - w) * w_nodes[k].x + w * w_nodes[k + 1].x,
                (1.0 - w) * w_nodes[k].y + w * w_nodes[k + 1].y};
    }

    /// Sum of jump sizes with jump time <= t (strict < t if left limit).
    Point jump_sum(double t, bool strict) const {
        std::size_t lo = 0, hi = jumps.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            bool take = strict ? (jumps[mid].t < t) : (jumps[mid].t <= t);
            if (take) lo = mid + 1; else hi = mid;
        }
        return jump_prefix[lo];
    }
};

/// Cadlag position X_t = x0 + W_t + sum of jumps up to and including t.
inline Point position(const LevyPath& p, double t) {
    Point w = p.brownian(t);
    Point j = p.jump_sum(t, /*strict=*/false);
    return {p.x0.x + w.x + j.x, p.x0.y + w.y + j.y};
}

/// Left limit X_{t-}; differs from position(t) exactly at jump times.
inline Point left_limit(const LevyPath& p, double t) {
    Point w = p.brownian(t);
    Point j = p.jump_sum(t, /*strict=*/true);
    return {p.x0.x + w.x + j.x, p.x0.y + w.y + j.y};
}

/// Sample one path. Deterministic in (config.seed, path_index): the
/// Brownian and jump channels use independent derived streams, so a path
/// can be regenerated bit-exactly in isolation.
inline LevyPath sample_path(const LevyConfig& config, Point x0,
                            std::uint64_t path_index) {
    config.validate();
    LevyPath p;
    p.config = config;
    p.x0 = x0;
    p.path_index = path_index;

    const TimeGrid& tg = config.t_grid;
    int m = tg.n_intervals();
    double T = tg.T();

    auto bm_rng = make_engine(config.seed, 0, path_index);
    std::normal_distribution<double> gauss(0.0, 1.0);
    p.increments.resize(static_cast<std::size_t>(m));
    p.w_nodes.assign(static_cast<std::size_t>(m) + 1, Point{});
    for (int k = 0; k < m; ++k) {
        double sd = std::sqrt(tg.dt(k));
        Point dw{sd * gauss(bm_rng), 0.0};
        if (config.d == 2) dw.y = sd * gauss(bm_rng);
        p.increments[static_cast<std::size_t>(k)] = dw;
        p.w_nodes[static_cast<std::size_t>(k) + 1] =
            p.w_nodes[static_cast<std::size_t>(k)] + dw;
    }

    auto jump_rng = make_engine(config.seed, 1, path_index);
    if (T > 0.0) {
        double lam = jump_rate(config, config.eps_trunc);
        std::poisson_distribution<int> pois(lam * T);
        int n_jumps = pois(jump_rng);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double ea = std::pow(config.eps_trunc, -config.alpha);
        double za = std::pow(config.z_max, -config.alpha);
        p.jumps.resize(static_cast<std::size_t>(n_jumps));
        for (auto& j : p.jumps) {
            j.t = T * unif(jump_rng);
            double u = unif(jump_rng);
            double r = std::pow(ea - u * (ea - za), -1.0 / config.alpha);
            if (config.d == 1) {
                j.z = {unif(jump_rng) < 0.5 ? -r : r, 0.0};
            } else {
                double th = 2.0 * M_PI * unif(jump_rng);
                j.z = {r * std::cos(th), r * std::sin(th)};
            }
        }
        std::sort(p.jumps.begin(), p.jumps.end(),
                  [](const Jump& a, const Jump& b) { return a.t < b.t; });
    }
    p.jump_prefix.assign(p.jumps.size() + 1, Point{});
    for (std::size_t j = 0; j < p.jumps.size(); ++j)
        p.jump_prefix[j + 1] = p.jump_prefix[j] + p.jumps[j].z;
    return p;
}

inline int count_jumps_above(const LevyPath& p, double r) {
    int c = 0;
    for (const auto& j : p.jumps)
        if (j.z.norm() > r) ++c;
    return c;
}

/// Result of the Lebesgue-invariance diagnostic.
struct InvarianceResult {
    double ks_distance = 0.0;
    double p_value = 1.0;
    int n_interior = 0;
    int n_paths = 0;
};

/// Start n_paths uniformly on [box_lo, box_hi], evolve to the horizon, and
/// compare the endpoints that landed in the interior window against the
/// uniform law there (Kolmogorov-Smirnov). The p-value is Monte Carlo:
/// the KS distance is re-sampled n_replicates times under the null.
/// Lebesgue measure is invariant for the process, so interior endpoints
/// should look uniform up to boundary leakage.
inline InvarianceResult invariance_diagnostic(const LevyConfig& config, int n_paths,
                                              double box_lo, double box_hi,
                                              double interior_lo, double interior_hi,
                                              std::uint64_t seed,
                                              int n_replicates = 199) {
    config.validate();
    if (n_paths < 100)
        throw ConfigError("invariance_diagnostic: need at least 100 paths");
    if (!(box_lo < box_hi) || !(interior_lo < interior_hi) ||
        interior_lo < box_lo || interior_hi > box_hi)
        throw ConfigError("invariance_diagnostic: interior window must sit inside the box");

    auto start_rng = make_engine(seed, 2, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    LevyConfig c = config;
    c.seed = derive_seed(seed, 4, 0);

    std::vector<double> interior;
    interior.reserve(static_cast<std::size_t>(n_paths));
    double T = c.t_grid.T();
    for (int i = 0; i < n_paths; ++i) {
        double x0 = box_lo + (box_hi - box_lo) * unif(start_rng);
        LevyPath p = sample_path(c, Point{x0, 0.0}, static_cast<std::uint64_t>(i));
        double xT = position(p, T).x;
        if (xT >= interior_lo && xT <= interior_hi) interior.push_back(xT);
    }

    InvarianceResult r;
    r.n_paths = n_paths;
    r.n_interior = static_cast<int>(interior.size());
    if (interior.empty()) {
        r.ks_distance = 1.0;
        r.p_value = 0.0;
        return r;
    }
    auto cdf = [&](double x) {
        return std::clamp((x - interior_lo) / (interior_hi - interior_lo), 0.0, 1.0);
    };
    r.ks_distance = ks_statistic(interior, cdf);

    auto rep_rng = make_engine(seed, 3, 0);
    int exceed = 0;
    std::vector<double> rep(interior.size());
    for (int b = 0; b < n_replicates; ++b) {
        for (auto& x : rep)
            x = interior_lo + (interior_hi - interior_lo) * unif(rep_rng);
        if (ks_statistic(rep, cdf) >= r.ks_distance) ++exceed;
    }
    r.p_value = (1.0 + static_cast<double>(exceed)) /
                (1.0 + static_cast<double>(n_replicates));
    return r;
}

} // namespace penlab
