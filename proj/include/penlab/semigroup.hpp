#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "penlab/errors.hpp"
#include "penlab/generator.hpp"
#include "penlab/grid.hpp"

namespace penlab {

/// Gaussian heat kernel q_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / (2t)).
inline double heat_kernel(double t, double x, int d = 1) {
    if (!(t > 0.0)) throw RangeError("heat_kernel: t must be positive");
    double norm = std::pow(2.0 * M_PI * t, -0.5 * static_cast<double>(d));
    return norm * std::exp(-x * x / (2.0 * t));
}

/// Semigroup P_t = exp(t A_h) of a discretized generator, realized through
/// the symmetric eigendecomposition A_h = Q diag(lambda) Q^T. All queries
/// are O(n^2) once the decomposition is built.
class Semigroup {
public:
    explicit Semigroup(const DiscreteGenerator& gen) : gen_(&gen) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gen.matrix());
        if (es.info() != Eigen::Success)
            throw ConfigError("Semigroup: eigendecomposition failed");
        Q_ = es.eigenvectors();
        lambda_ = es.eigenvalues();
    }

    const DiscreteGenerator& generator() const { return *gen_; }
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }

    /// P_t g. t = 0 returns g unchanged.
    GridFunction apply(const GridFunction& g, double t) const {
        if (g.grid != gen_->grid()) throw RangeError("Semigroup::apply: grid mismatch");
        if (t < 0.0) throw RangeError("Semigroup::apply: t must be >= 0");
        Eigen::Map<const Eigen::VectorXd> gv(g.v.data(), g.size());
        Eigen::VectorXd c = Q_.transpose() * gv;
        for (int j = 0; j < c.size(); ++j) c[j] *= std::exp(t * lambda_[j]);
        GridFunction out(g.grid);
        Eigen::Map<Eigen::VectorXd>(out.v.data(), out.size()) = Q_ * c;
        return out;
    }

    /// Transition density between nodes in the discretized model,
    /// p_t(x_i, x_j) = (e^{t A_h})_{ij} / h.
    double transition_density(double t, int i, int j) const {
        if (!(t > 0.0)) throw RangeError("Semigroup::transition_density: t must be positive");
        int n = static_cast<int>(lambda_.size());
        if (i < 0 || j < 0 || i >= n || j >= n)
            throw RangeError("Semigroup::transition_density: node index out of range");
        double s = 0.0;
        for (int m = 0; m < n; ++m)
            s += Q_(i, m) * std::exp(t * lambda_[m]) * Q_(j, m);
        return s / gen_->grid().spacing();
    }

    /// Resolvent of the space-time semigroup,
    ///   (U_alpha psi)_t = int_t^T exp(-alpha (s - t)) P_{s-t} psi_s ds,
    /// trapezoid in s on psi's own time grid, evaluated at every time node.
    SpaceTimeField resolvent_field(const SpaceTimeField& psi, double alpha_res) const {
        if (psi.grid != gen_->grid())
            throw RangeError("Semigroup::resolvent_field: grid mismatch");
        if (alpha_res < 0.0)
            throw RangeError("Semigroup::resolvent_field: alpha must be >= 0");
        psi.times.validate();
        int nk = psi.n_frames();
        int n = gen_->grid().n_x;

        // Eigen coordinates of every frame.
        Eigen::MatrixXd C(n, nk);
        for (int k = 0; k < nk; ++k) {
            Eigen::Map<const Eigen::VectorXd> f(psi.frames[static_cast<std::size_t>(k)].data(), n);
            C.col(k) = Q_.transpose() * f;
        }

        SpaceTimeField out(psi.times, psi.grid);
        Eigen::VectorXd acc(n);
        for (int k = 0; k < nk; ++k) {
            acc.setZero();
            double tk = psi.times.nodes[static_cast<std::size_t>(k)];
            for (int s = k; s < nk; ++s) {
                double w;
                if (s == k)
                    w = (s + 1 < nk) ? 0.5 * psi.times.dt(s) : 0.0;
                else if (s + 1 < nk)
                    w = 0.5 * (psi.times.dt(s - 1) + psi.times.dt(s));
                else
                    w = 0.5 * psi.times.dt(s - 1);
                if (w == 0.0) continue;
                double gap = psi.times.nodes[static_cast<std::size_t>(s)] - tk;
                for (int j = 0; j < n; ++j)
                    acc[j] += w * std::exp((lambda_[j] - alpha_res) * gap) * C(j, s);
            }
            Eigen::Map<Eigen::VectorXd>(out.frames[static_cast<std::size_t>(k)].data(), n) = Q_ * acc;
        }
        return out;
    }

    /// Resolvent at a single time node t (t must be a node of psi's grid).
    GridFunction resolvent(const SpaceTimeField& psi, double alpha_res, double t) const {
        int k = psi.times.index_of(t);
        SpaceTimeField full = resolvent_field(psi, alpha_res);
        return full.frame(k);
    }

private:
    const DiscreteGenerator* gen_;
    Eigen::MatrixXd Q_;
    Eigen::VectorXd lambda_;
};

/// Output of the potential approximation of a regular potential u_bar:
///   f_n = n (u_bar - n U_n u_bar),  u_n = U_0 f_n.
/// For excessive u_bar (P_s-supermedian), f_n >= 0 up to quadrature noise
/// and u_n increases to u_bar; `excessive` reports whether min f_n stayed
/// above -tolerance.
struct PotentialApproximation {
    SpaceTimeField f_n;
    SpaceTimeField u_n;
    double min_f_n = 0.0;
    bool excessive = true;
};

inline PotentialApproximation potential_approximation(const Semigroup& sg,
                                                      const SpaceTimeField& u_bar,
                                                      double n,
                                                      double excess_tol) {
    if (!(n > 0.0)) throw RangeError("potential_approximation: n must be positive");
    SpaceTimeField un_bar = sg.resolvent_field(u_bar, n);
    PotentialApproximation out;
    out.f_n = SpaceTimeField(u_bar.times, u_bar.grid);
    for (int k = 0; k < u_bar.n_frames(); ++k)
        for (int i = 0; i < u_bar.grid.n_x; ++i)
            out.f_n.value(k, i) = n * (u_bar.value(k, i) - n * un_bar.value(k, i));
    out.u_n = sg.resolvent_field(out.f_n, 0.0);
    double mn = 0.0;
    for (const auto& fr : out.f_n.frames)
        for (double x : fr) mn = std::min(mn, x);
    out.min_f_n = mn;
    out.excessive = mn >= -excess_tol;
    return out;
}

} // namespace penlab
