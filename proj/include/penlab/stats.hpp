#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "penlab/errors.hpp"

namespace penlab {

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a),
/// series for x < a + 1, continued fraction otherwise.
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw RangeError("gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    const int itmax = 500;
    const double eps = 1e-14;
    if (x < a + 1.0) {
        // P(a,x) by series, Q = 1 - P.
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < itmax; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * eps) break;
        }
        double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        return std::max(0.0, 1.0 - p);
    }
    // Q(a,x) by Lentz continued fraction.
    const double fpmin = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= itmax; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

/// p-value of a chi-squared statistic with df degrees of freedom.
inline double chi2_pvalue(double stat, int df) {
    if (df <= 0) throw RangeError("chi2_pvalue: df must be positive");
    return gamma_q(0.5 * static_cast<double>(df), 0.5 * stat);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double poisson_pmf(int k, double lambda) {
    if (k < 0) return 0.0;
    if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(static_cast<double>(k) * std::log(lambda) - lambda -
                    std::lgamma(static_cast<double>(k) + 1.0));
}

struct Chi2Result {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
};

/// Chi-squared goodness of fit of integer counts against a Poisson(lambda)
/// law with known rate. Cells are 0,1,2,... with the upper tail merged so
/// every expected cell count is >= 5.
inline Chi2Result chi2_poisson_gof(const std::vector<int>& counts, double lambda) {
    if (counts.empty()) throw RangeError("chi2_poisson_gof: no samples");
    double n = static_cast<double>(counts.size());
    int kmax = 0;
    for (int c : counts) kmax = std::max(kmax, c);

    // Choose the last standalone cell so that the merged tail keeps an
    // expected count >= 5.
    int cut = 0;
    double tail = 1.0;
    while (true) {
        double pk = poisson_pmf(cut, lambda);
        double tail_after = tail - pk;
        if (n * tail_after < 5.0 || cut > kmax + 50) break;
        tail = tail_after;
        ++cut;
    }
    if (cut < 1) cut = 1;

    std::vector<double> expected(static_cast<std::size_t>(cut) + 1, 0.0);
    std::vector<double> observed(static_cast<std::size_t>(cut) + 1, 0.0);
    double head = 0.0;
    for (int k = 0; k < cut; ++k) {
        expected[static_cast<std::size_t>(k)] = n * poisson_pmf(k, lambda);
        head += poisson_pmf(k, lambda);
    }
    expected[static_cast<std::size_t>(cut)] = n * std::max(0.0, 1.0 - head);
    for (int c : counts) observed[static_cast<std::size_t>(std::min(c, cut))] += 1.0;

    // Merge any low-expectation head cells into their neighbour.
    Chi2Result r;
    double stat = 0.0;
    int cells = 0;
    double obs_acc = 0.0;
    double exp_acc = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k) {
        obs_acc += observed[k];
        exp_acc += expected[k];
        bool last = (k + 1 == expected.size());
        if (exp_acc >= 5.0 || last) {
            if (exp_acc > 0.0) {
                double d = obs_acc - exp_acc;
                stat += d * d / exp_acc;
                ++cells;
            }
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    r.statistic = stat;
    r.df = std::max(1, cells - 1);
    r.p_value = chi2_pvalue(stat, r.df);
    return r;
}

/// Two-sided sign test that P(x > center) = 1/2, normal approximation.
inline double sign_test_pvalue(const std::vector<double>& xs, double center) {
    std::size_t n = 0;
    std::size_t pos = 0;
    for (double x : xs) {
        if (x == center) continue;
        ++n;
        if (x > center) ++pos;
    }
    if (n == 0) return 1.0;
    double z = (static_cast<double>(pos) - 0.5 * static_cast<double>(n)) /
               std::sqrt(0.25 * static_cast<double>(n));
    return 2.0 * normal_cdf(-std::abs(z));
}

/// Kolmogorov-Smirnov distance of samples against a CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    if (xs.empty()) throw RangeError("ks_statistic: no samples");
    std::sort(xs.begin(), xs.end());
    double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = cdf(xs[i]);
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
    }
    return d;
}

/// Streaming mean / standard error (Welford).
class MeanAccumulator {
public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double std_error() const {
        return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

} // namespace penlab
