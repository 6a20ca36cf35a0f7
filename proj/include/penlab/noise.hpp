#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/grid.hpp"
#include "penlab/rng.hpp"

namespace penlab {

/// Increments of the d1-dimensional driving noise B over each interval of a
/// time grid. The solver consumes the increment for [t_k, t_{k+1}) when
/// stepping from t_{k+1} down to t_k (the stochastic term is evaluated at
/// the later time level).
struct NoisePath {
    TimeGrid times;
    int d1 = 1;
    std::vector<std::vector<double>> increments; // [interval][component]
    std::uint64_t seed = 0;

    double increment(int k, int j) const {
        return increments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }

    /// Same grid, all increments negated (useful for symmetry checks).
    NoisePath negated() const {
        NoisePath n = *this;
        for (auto& row : n.increments)
            for (double& x : row) x = -x;
        return n;
    }

    static NoisePath zero(const TimeGrid& tg, int d1) {
        if (d1 < 1) throw ConfigError("NoisePath: d1 must be >= 1");
        NoisePath n;
        n.times = tg;
        n.d1 = d1;
        n.increments.assign(static_cast<std::size_t>(tg.n_intervals()),
                            std::vector<double>(static_cast<std::size_t>(d1), 0.0));
        return n;
    }
};

/// Brownian increments N(0, dt) per interval and component, deterministic
/// in the seed.
inline NoisePath sample_noise(const TimeGrid& tg, int d1, std::uint64_t seed) {
    tg.validate();
    NoisePath n = NoisePath::zero(tg, d1);
    n.seed = seed;
    auto rng = make_engine(seed, 7, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < tg.n_intervals(); ++k) {
        double sd = std::sqrt(tg.dt(k));
        for (int j = 0; j < d1; ++j)
            n.increments[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
                sd * gauss(rng);
    }
    return n;
}

} // namespace penlab
