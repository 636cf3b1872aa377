#pragma once

// Functions on [a, b] sampled at Chebyshev-Lobatto points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "thetacf/errors.hpp"

namespace thetacf {

namespace detail {

/// Clenshaw evaluation of sum_k c_k T_k(s).
inline double clenshaw(const std::vector<double>& c, double s) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        const double b0 = 2 * s * b1 - b2 + c[k];
        b2 = b1;
        b1 = b0;
    }
    return s * b1 - b2 + (c.empty() ? 0.0 : c[0]);
}

}  // namespace detail

/// Samples of a function at the degree+1 Chebyshev-Lobatto points of [a, b],
/// listed in increasing order. Evaluation between nodes is barycentric, so a
/// polynomial of degree <= degree is reproduced to rounding.
class GridFunction {
public:
    GridFunction() = default;

    GridFunction(double a, double b, std::vector<double> values) : a_(a), b_(b), values_(std::move(values)) {
        if (values_.size() < 2) throw validation_error("a grid function needs at least two nodes");
        if (!(a < b)) throw validation_error("grid interval must satisfy a < b");
    }

    template <class F>
    static GridFunction sample(F&& f, double a, double b, std::size_t degree) {
        std::vector<double> v(degree + 1);
        for (std::size_t j = 0; j <= degree; ++j) v[j] = f(node(a, b, degree, j));
        return GridFunction(a, b, std::move(v));
    }

    static double node(double a, double b, std::size_t degree, std::size_t j) {
        if (j == 0) return a;
        if (j == degree) return b;
        const double s = -std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(degree));
        return 0.5 * (a + b) + 0.5 * (b - a) * s;
    }

    std::size_t degree() const noexcept { return values_.size() - 1; }
    double lower() const noexcept { return a_; }
    double upper() const noexcept { return b_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double node(std::size_t j) const { return node(a_, b_, degree(), j); }

    std::vector<double> nodes() const {
        std::vector<double> x(values_.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = node(j);
        return x;
    }

    double operator()(double x) const {
        const std::size_t n = degree();
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            const double d = x - node(j);
            if (d == 0.0) return values_[j];
            double w = (j % 2 == 0) ? 1.0 : -1.0;
            if (j == 0 || j == n) w *= 0.5;
            w /= d;
            num += w * values_[j];
            den += w;
        }
        return num / den;
    }

    /// Coefficients c_k of f(x) = sum c_k T_k(s), s = (2x - a - b)/(b - a).
    std::vector<double> chebyshev_coefficients() const {
        const std::size_t n = degree();
        const double nd = static_cast<double>(n);
        std::vector<double> c(n + 1, 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j <= n; ++j) {
                // node j sits at s = cos(pi (n - j)/n)
                const double t = std::cos(std::numbers::pi * static_cast<double>(k * (n - j) % (2 * n)) / nd);
                const double w = (j == 0 || j == n) ? 0.5 : 1.0;
                sum += w * values_[j] * t;
            }
            c[k] = 2.0 * sum / nd;
        }
        c[0] *= 0.5;
        c[n] *= 0.5;
        return c;
    }

    /// The derivative of the interpolant, by differentiating its Chebyshev series.
    GridFunction derivative() const {
        const std::vector<double> c = chebyshev_coefficients();
        const std::size_t n = degree();
        std::vector<double> d(n + 2, 0.0);
        for (std::size_t k = n; k >= 1; --k) d[k - 1] = d[k + 1] + 2.0 * static_cast<double>(k) * c[k];
        d[0] *= 0.5;
        d.resize(n + 1);
        const double scale = 2.0 / (b_ - a_);
        for (double& v : d) v *= scale;
        std::vector<double> vals(n + 1);
        for (std::size_t j = 0; j <= n; ++j) vals[j] = detail::clenshaw(d, to_unit(node(j)));
        return GridFunction(a_, b_, std::move(vals));
    }

    /// max |f| over `factor` * degree + 1 equally spaced points (endpoints included).
    double sup_norm(std::size_t factor = 4) const {
        double best = 0.0;
        for (double x : dense_grid(factor)) best = std::max(best, std::fabs((*this)(x)));
        return best;
    }

    std::vector<double> dense_grid(std::size_t factor = 4) const {
        const std::size_t count = factor * degree() + 1;
        std::vector<double> x(count);
        for (std::size_t i = 0; i < count; ++i) {
            x[i] = a_ + (b_ - a_) * static_cast<double>(i) / static_cast<double>(count - 1);
        }
        x.back() = b_;
        return x;
    }

    template <class F>
    GridFunction map(F&& f) const {
        std::vector<double> v(values_.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(node(j), values_[j]);
        return GridFunction(a_, b_, std::move(v));
    }

private:
    double to_unit(double x) const { return (2 * x - a_ - b_) / (b_ - a_); }

    double a_ = 0.0;
    double b_ = 1.0;
    std::vector<double> values_;
};

}  // namespace thetacf
