#pragma once

// The invariant measure gamma_theta and the scalar constants attached to it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "thetacf/errors.hpp"
#include "thetacf/numerics.hpp"
#include "thetacf/params.hpp"
#include "thetacf/qtheta.hpp"

namespace thetacf {

inline constexpr double kDefaultConstantsTolerance = 1e-12;

namespace detail {

inline double check_unit_interval(double x, const ThetaParams& params) {
    const double slack = 4 * std::numeric_limits<double>::epsilon() * params.theta();
    if (!(x >= -slack && x <= params.theta() + slack)) {
        throw domain_error("x = " + std::to_string(x) + " lies outside [0, theta]");
    }
    return std::clamp(x, 0.0, params.theta());
}

inline void check_tolerance(double tol) {
    if (!(tol > 0.0) || !std::isfinite(tol)) throw validation_error("tolerance must be positive");
}

}  // namespace detail

/// gamma_theta([0, x]) = log(1 + theta x) / log(1 + theta^2).
inline double gamma_cdf(double x, const ThetaParams& params) {
    x = detail::check_unit_interval(x, params);
    return std::log1p(params.theta() * x) / params.log_normalizer();
}

/// Density of gamma_theta with respect to Lebesgue measure on [0, theta].
inline double gamma_density(double x, const ThetaParams& params) {
    x = detail::check_unit_interval(x, params);
    return params.theta() / ((1 + params.theta() * x) * params.log_normalizer());
}

/// The Gauss-Kuzmin limit written as log((m theta + x) theta) / log(1 + theta^2).
/// Since m theta^2 = 1 this is gamma_cdf; it is kept in this form so the two can be compared.
inline double gk_limit_cdf(double x, const ThetaParams& params) {
    x = detail::check_unit_interval(x, params);
    const double th = params.theta();
    return std::log((static_cast<double>(params.m()) * th + x) * th) / params.log_normalizer();
}

/// gamma_theta(a_1 = k) = log(1 + 1/(k(k+2))) / log(1 + theta^2).
inline double digit_law(std::int64_t k, const ThetaParams& params) {
    if (k < params.m()) {
        throw validation_error("digit " + std::to_string(k) + " is below m = " + std::to_string(params.m()));
    }
    const double kd = static_cast<double>(k);
    return std::log1p(1.0 / (kd * (kd + 2.0))) / params.log_normalizer();
}

/// Levy's constant beta = -(1/log(1+theta^2)) int_0^theta theta log x / (1 + theta x) dx.
///
/// On (0, theta/2] the factor 1/(1 + theta x) is expanded geometrically and each
/// x^k log x is integrated in closed form; [theta/2, theta] goes to adaptive
/// Gauss-Kronrod.
inline Estimate levy_beta(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    detail::check_tolerance(tol);
    const double th = params.theta();
    const double c = th / 2;
    const double log_c = std::log(c);
    const double ratio = th * c;  // at most 1/4

    long double series = 0.0L;
    double power = th * c;  // theta * (-theta)^k * c^(k+1), sign applied below
    double tail_bound = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double kp1 = k + 1.0;
        const double term = (k % 2 == 0 ? 1.0 : -1.0) * power * (log_c / kp1 - 1.0 / (kp1 * kp1));
        series += term;
        tail_bound = std::fabs(term) * ratio / (1 - ratio);
        if (tail_bound < tol * 1e-3) break;
        power *= ratio;
    }
    const Estimate right =
        integrate_gk([th](double x) { return th * std::log(x) / (1 + th * x); }, c, th, tol * 0.25 * params.log_normalizer());
    const double integral = static_cast<double>(series) + right.value;
    return {-integral / params.log_normalizer(), (tail_bound + right.error) / params.log_normalizer()};
}

/// beta from a single double-exponential quadrature over [0, theta]; an independent route to levy_beta.
inline Estimate levy_beta_tanh_sinh(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    detail::check_tolerance(tol);
    const double th = params.theta();
    const Estimate r = integrate_tanh_sinh(
        [th](double x) { return x <= 0.0 ? 0.0 : th * std::log(x) / (1 + th * x); }, 0.0, th,
        tol * 0.25 * params.log_normalizer());
    return {-r.value / params.log_normalizer(), r.error / params.log_normalizer()};
}

/// Entropy of T_theta with respect to gamma_theta. By Rohlin's formula it is
/// int -log|T'| dgamma = int -2 log x dgamma, which equals 2 beta.
inline Estimate entropy(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    const Estimate b = levy_beta(params, tol / 2);
    return {2 * b.value, 2 * b.error};
}

/// Almost-sure limit of (a_1 ... a_n)^(1/n):
/// exp( sum_{k>=m} log k * log(1 + 1/(k(k+2))) / log(1 + theta^2) ).
inline Estimate khintchin_product(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    detail::check_tolerance(tol);
    const double L = params.log_normalizer();
    const std::int64_t m = params.m();
    // the product is below 4m for every m, so this bounds the final error by tol
    const double series_tol = tol * L / (4.0 * static_cast<double>(m));
    const Estimate s = sum_convex_series(
        [](double k) { return std::log(k) * std::log1p(1.0 / (k * (k + 2.0))); }, m, std::max<std::int64_t>(m, 16),
        series_tol);
    const double value = std::exp(s.value / L);
    return {value, value * std::expm1(s.error / L)};
}

/// k_m = 1/(m+1), the variation contraction factor of U on monotone functions.
inline BigRational contraction_km(const ThetaParams& params) { return BigRational(1, params.m() + 1); }

/// q = m * sum_{i>=m} ( m/(i^3 (i+1)) + (i+1-m)/(i (i+1)^3) ), the Lipschitz contraction factor of U.
inline Estimate contraction_q(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    detail::check_tolerance(tol);
    const double md = static_cast<double>(params.m());
    // (i+1-m)/(i(i+1)^3) decreases for i > 4m/3 and is convex for i > 5m/3
    const Estimate s = sum_convex_series(
        [md](double i) {
            const double i1 = i + 1.0;
            return md / (i * i * i * i1) + (i1 - md) / (i * i1 * i1 * i1);
        },
        params.m(), 2 * params.m() + 16, tol / md);
    return {md * s.value, md * s.error};
}

struct ConstantsReport {
    std::int64_t m = 0;
    double theta = 0.0;
    Estimate beta;
    /// beta from the independent double-exponential route.
    Estimate beta_check;
    Estimate entropy;
    Estimate khintchin_geo;
    BigRational k_m;
    Estimate q;
    bool q_lt_theta = false;
    double tolerance = 0.0;
};

inline ConstantsReport constants_report(const ThetaParams& params, double tol = kDefaultConstantsTolerance) {
    ConstantsReport r;
    r.m = params.m();
    r.theta = params.theta();
    r.beta = levy_beta(params, tol);
    r.beta_check = levy_beta_tanh_sinh(params, tol);
    r.entropy = {2 * r.beta.value, 2 * r.beta.error};
    r.khintchin_geo = khintchin_product(params, tol);
    r.k_m = contraction_km(params);
    r.q = contraction_q(params, tol);
    r.q_lt_theta = r.q.value + r.q.error < r.theta;
    r.tolerance = tol;
    return r;
}

}  // namespace thetacf
