#pragma once

// Quadrature and series summation with error estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "thetacf/errors.hpp"

namespace thetacf {

/// A computed value together with a bound (or estimate) of its absolute error.
struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive 7/15-point Gauss-Kronrod on [a, b]. Throws numerical_error if the
/// error estimate stays above `tol` after `max_depth` bisections.
template <class F>
Estimate integrate_gk(F&& f, double a, double b, double tol, unsigned max_depth = 30) {
    double err = 0.0;
    double l1 = 0.0;
    const double rel = std::max(tol / std::max(std::fabs(b - a), 1e-300), 1e-15);
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel, &err, &l1);
    const double abs_err = err * std::max(l1, std::fabs(v));
    if (!std::isfinite(v) || abs_err > tol) {
        throw numerical_error("Gauss-Kronrod quadrature did not reach tolerance " + std::to_string(tol));
    }
    return {v, abs_err};
}

/// Double-exponential quadrature on [a, b]; tolerates integrable endpoint singularities.
template <class F>
Estimate integrate_tanh_sinh(F&& f, double a, double b, double tol, std::size_t max_refinements = 15) {
    boost::math::quadrature::tanh_sinh<double> rule(max_refinements);
    double err = 0.0;
    double l1 = 0.0;
    const double v = rule.integrate(f, a, b, 1e-15, &err, &l1);
    const double abs_err = err * std::max(l1, std::fabs(v));
    if (!std::isfinite(v) || abs_err > tol) {
        throw numerical_error("tanh-sinh quadrature did not reach tolerance " + std::to_string(tol));
    }
    return {v, abs_err};
}

/// Integral of g over [a, infinity), through t = a/u on (0, 1].
template <class G>
Estimate integrate_to_infinity(G&& g, double a, double tol) {
    auto h = [&](double u) {
        const double t = a / u;
        // a/u^2 = t^2/a; the far end contributes nothing at double precision
        if (!(t < 1e150)) return 0.0;
        return g(t) * (t * t / a);
    };
    return integrate_tanh_sinh(h, 0.0, 1.0, tol);
}

/// Sum of g(k) for k >= first, where g is positive, decreasing and convex on
/// [convex_from, infinity). Terms below convex_from are always summed directly.
///
/// After the direct sum up to N the tail is bracketed by
/// int_{N+1}^inf g + g(N+1)/2 <= sum_{k>N} g(k) <= int_{N+1/2}^inf g
/// (trapezoid and midpoint comparison for convex g). N doubles until the
/// bracket is narrower than tol; the midpoint is returned, and the error is
/// the half width plus the quadrature error.
template <class G>
Estimate sum_convex_series(G&& g, std::int64_t first, std::int64_t convex_from, double tol,
                           std::int64_t max_terms = std::int64_t{1} << 26) {
    long double direct = 0.0L;
    std::int64_t k = first;
    std::int64_t stop = std::max(first + 64, convex_from + 1);
    while (true) {
        for (; k <= stop; ++k) direct += g(static_cast<double>(k));
        const double n1 = static_cast<double>(stop + 1);
        const Estimate lo_int = integrate_to_infinity(g, n1, tol * 0.25);
        const Estimate hi_int = integrate_to_infinity(g, n1 - 0.5, tol * 0.25);
        const double lo = lo_int.value + 0.5 * g(n1);
        const double hi = hi_int.value;
        const double half = 0.5 * std::fabs(hi - lo);
        if (2 * half <= tol) {
            const double value = static_cast<double>(direct + 0.5L * (static_cast<long double>(lo) + hi));
            const double rounding = 4 * std::numeric_limits<double>::epsilon() * std::fabs(value);
            return {value, half + lo_int.error + hi_int.error + rounding};
        }
        if (stop - first > max_terms) {
            throw numerical_error("series tail bound did not reach tolerance " + std::to_string(tol));
        }
        stop = first + 2 * (stop - first);
    }
}

}  // namespace thetacf
