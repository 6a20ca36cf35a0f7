#pragma once

#include <functional>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/grid.hpp"

namespace penlab {

/// Scalar coefficient of the equation, evaluated at (t, x, y, z) where y is
/// the current solution value and z its spatial gradient.
using Coefficient = std::function<double(double t, double x, double y, double z)>;

/// Data of one backward problem on [0, T]:
///   du + [A u + f(t,x,u,Du) + n (u - v_t)^-] dt + h(t,x,u,Du) dB = 0,
///   u_T = terminal, obstacle v, d1-dimensional noise.
struct ProblemSpec {
    Grid grid;
    TimeGrid times;
    GridFunction terminal;       // final condition Phi
    Coefficient f;               // drift
    std::vector<Coefficient> h;  // noise coefficients, one per component
    SpaceTimeField obstacle;     // v, on the same (times, grid) layout
    double lipschitz_c = 0.0;    // declared Lipschitz constant of f, h
    double beta = 0.0;           // contraction constant of h in z
    int d1 = 1;

    double T() const { return times.T(); }

    void validate() const {
        grid.validate();
        times.validate();
        if (!(beta * beta < 1.0))
            throw ConfigError("ProblemSpec: need beta^2 < 1");
        if (d1 < 1) throw ConfigError("ProblemSpec: d1 must be >= 1");
        if (static_cast<int>(h.size()) != d1)
            throw ConfigError("ProblemSpec: h must have d1 components");
        if (terminal.grid != grid || terminal.size() != grid.n_x)
            throw ConfigError("ProblemSpec: terminal condition grid mismatch");
        if (obstacle.grid != grid || !(obstacle.times == times))
            throw ConfigError("ProblemSpec: obstacle layout mismatch");
        if (!f) throw ConfigError("ProblemSpec: missing drift f");
        for (const auto& hj : h)
            if (!hj) throw ConfigError("ProblemSpec: missing noise coefficient");
        int last = obstacle.n_frames() - 1;
        for (int i = 0; i < grid.n_x; ++i)
            if (obstacle.value(last, i) > terminal[i] + 1e-12)
                throw ConfigError("ProblemSpec: obstacle must satisfy v_T <= terminal");
    }
};

/// Convenience: a coefficient that ignores (y, z).
inline Coefficient coefficient_of(std::function<double(double, double)> g) {
    return [g = std::move(g)](double t, double x, double, double) { return g(t, x); };
}

inline Coefficient zero_coefficient() {
    return [](double, double, double, double) { return 0.0; };
}

} // namespace penlab
