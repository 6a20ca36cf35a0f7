#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "penlab/errors.hpp"

namespace penlab {

/// How a grid function is read outside the truncation box [-L, L].
///   ZeroExtension: values vanish outside (Dirichlet-type truncation).
///   Periodic:      indices wrap, period n_x * h.
enum class BoundaryRule { ZeroExtension, Periodic };

inline std::string to_string(BoundaryRule r) {
    return r == BoundaryRule::ZeroExtension ? "zero" : "periodic";
}

/// Uniform spatial grid on [-L, L] with n_x nodes, x_i = -L + i*h.
struct Grid {
    double L = 10.0;
    int n_x = 129;
    BoundaryRule rule = BoundaryRule::ZeroExtension;

    double spacing() const { return 2.0 * L / static_cast<double>(n_x - 1); }
    double node(int i) const { return -L + spacing() * static_cast<double>(i); }

    void validate() const {
        if (!(L > 0.0)) throw ConfigError("Grid: L must be positive");
        if (n_x < 3 || n_x % 2 == 0)
            throw ConfigError("Grid: n_x must be odd and >= 3");
    }

    bool operator==(const Grid& o) const {
        return L == o.L && n_x == o.n_x && rule == o.rule;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }

    /// Wrap a node index periodically onto [0, n_x).
    int wrap(int i) const {
        int n = n_x;
        int r = i % n;
        return r < 0 ? r + n : r;
    }
};

/// Strictly increasing time nodes starting at 0; the last node is the
/// horizon T.
struct TimeGrid {
    std::vector<double> nodes;

    static TimeGrid uniform(double T, int n_t) {
        if (!(T > 0.0) || n_t < 1)
            throw ConfigError("TimeGrid: need T > 0 and n_t >= 1");
        TimeGrid tg;
        tg.nodes.resize(static_cast<std::size_t>(n_t) + 1);
        for (int k = 0; k <= n_t; ++k)
            tg.nodes[static_cast<std::size_t>(k)] =
                T * static_cast<double>(k) / static_cast<double>(n_t);
        tg.nodes.back() = T;
        return tg;
    }

    void validate() const {
        if (nodes.empty()) throw ConfigError("TimeGrid: empty");
        if (nodes.front() != 0.0) throw ConfigError("TimeGrid: must start at 0");
        for (std::size_t k = 1; k < nodes.size(); ++k)
            if (!(nodes[k] > nodes[k - 1]))
                throw ConfigError("TimeGrid: nodes must be strictly increasing");
    }

    double T() const { return nodes.back(); }
    int n_intervals() const { return static_cast<int>(nodes.size()) - 1; }
    int n_nodes() const { return static_cast<int>(nodes.size()); }
    double dt(int k) const {
        return nodes[static_cast<std::size_t>(k) + 1] - nodes[static_cast<std::size_t>(k)];
    }
    double max_dt() const {
        double m = 0.0;
        for (int k = 0; k < n_intervals(); ++k) m = std::max(m, dt(k));
        return m;
    }

    /// Index of a node equal to t (within a relative tolerance), or a
    /// RangeError if t is not a grid node.
    int index_of(double t) const {
        double tol = 1e-9 * std::max(1.0, T());
        for (std::size_t k = 0; k < nodes.size(); ++k)
            if (std::abs(nodes[k] - t) <= tol) return static_cast<int>(k);
        throw RangeError("TimeGrid: t is not a grid node");
    }

    bool operator==(const TimeGrid& o) const { return nodes == o.nodes; }
};

/// Values of a scalar field at the grid nodes.
struct GridFunction {
    Grid grid;
    std::vector<double> v;

    GridFunction() = default;
    explicit GridFunction(const Grid& g, double fill = 0.0)
        : grid(g), v(static_cast<std::size_t>(g.n_x), fill) {}

    double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(v.size()); }

    /// Grid L2 norm, sqrt(h * sum v_i^2).
    double l2_norm() const {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(grid.spacing() * s);
    }

    double sup_norm() const {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        return s;
    }

    /// Nodal value with the boundary rule applied to out-of-range indices.
    double at_ext(int i) const {
        if (i >= 0 && i < size()) return v[static_cast<std::size_t>(i)];
        if (grid.rule == BoundaryRule::Periodic) return v[static_cast<std::size_t>(grid.wrap(i))];
        return 0.0;
    }

    /// Linear interpolation at an arbitrary point. Zero-extension grids
    /// read 0 outside [-L, L]; periodic grids wrap.
    double interpolate(double x) const {
        double h = grid.spacing();
        if (grid.rule == BoundaryRule::Periodic) {
            double period = h * static_cast<double>(grid.n_x);
            double s = std::fmod(x - (-grid.L), period);
            if (s < 0.0) s += period;
            int i = static_cast<int>(std::floor(s / h));
            double w = s / h - static_cast<double>(i);
            return (1.0 - w) * at_ext(i) + w * at_ext(i + 1);
        }
        if (x <= -grid.L - h || x >= grid.L + h) return 0.0;
        double s = (x + grid.L) / h;
        int i = static_cast<int>(std::floor(s));
        double w = s - static_cast<double>(i);
        return (1.0 - w) * at_ext(i) + w * at_ext(i + 1);
    }

    /// Centered-difference gradient; one-sided at the boundary nodes of a
    /// zero-extension grid, wrapped on a periodic grid.
    GridFunction gradient() const {
        GridFunction g(grid);
        double h = grid.spacing();
        int n = size();
        if (grid.rule == BoundaryRule::Periodic) {
            for (int i = 0; i < n; ++i)
                g[i] = (at_ext(i + 1) - at_ext(i - 1)) / (2.0 * h);
            return g;
        }
        for (int i = 1; i + 1 < n; ++i) g[i] = (v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i - 1)]) / (2.0 * h);
        if (n >= 2) {
            g[0] = (v[1] - v[0]) / h;
            g[n - 1] = (v[static_cast<std::size_t>(n - 1)] - v[static_cast<std::size_t>(n - 2)]) / h;
        }
        return g;
    }
};

inline double inner(const GridFunction& a, const GridFunction& b) {
    if (a.grid != b.grid) throw RangeError("inner: grid mismatch");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return a.grid.spacing() * s;
}

/// Space-time field: one frame of nodal values per time node.
struct SpaceTimeField {
    TimeGrid times;
    Grid grid;
    std::vector<std::vector<double>> frames; // frames[k][i], k over time nodes

    SpaceTimeField() = default;
    SpaceTimeField(const TimeGrid& tg, const Grid& g, double fill = 0.0)
        : times(tg), grid(g),
          frames(static_cast<std::size_t>(tg.n_nodes()),
                 std::vector<double>(static_cast<std::size_t>(g.n_x), fill)) {}

    int n_frames() const { return static_cast<int>(frames.size()); }

    double value(int k, int i) const {
        return frames[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
    double& value(int k, int i) {
        return frames[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }

    GridFunction frame(int k) const {
        GridFunction f(grid);
        f.v = frames[static_cast<std::size_t>(k)];
        return f;
    }

    void set_frame(int k, const GridFunction& f) {
        frames[static_cast<std::size_t>(k)] = f.v;
    }

    /// sup over time nodes of the spatial L2 norm.
    double sup_l2() const {
        double s = 0.0;
        for (int k = 0; k < n_frames(); ++k) s = std::max(s, frame(k).l2_norm());
        return s;
    }

    double sup_norm() const {
        double s = 0.0;
        for (const auto& fr : frames)
            for (double x : fr) s = std::max(s, std::abs(x));
        return s;
    }
};

inline double sup_l2_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
    if (a.grid != b.grid || !(a.times == b.times))
        throw RangeError("sup_l2_distance: field layout mismatch");
    double h = a.grid.spacing();
    double worst = 0.0;
    for (int k = 0; k < a.n_frames(); ++k) {
        double s = 0.0;
        for (int i = 0; i < a.grid.n_x; ++i) {
            double d = a.value(k, i) - b.value(k, i);
            s += d * d;
        }
        worst = std::max(worst, std::sqrt(h * s));
    }
    return worst;
}

} // namespace penlab
