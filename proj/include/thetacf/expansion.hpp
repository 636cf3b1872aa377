#pragma once

// The theta-expansion x = 1/(a1*theta + 1/(a2*theta + ...)) with digits a_k >= m:
// the generating map, digit extraction, convergents, reconstruction and cylinders.
// Every operation has an exact Q(theta) form; the map and digits also have a
// hardware-float form intended for statistics only.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thetacf/errors.hpp"
#include "thetacf/params.hpp"
#include "thetacf/qtheta.hpp"

namespace thetacf {

/// Digit of the point 0 (the index map sends 0 to infinity).
inline constexpr std::int64_t kInfiniteDigit = std::numeric_limits<std::int64_t>::max();

/// Digits extracted in hardware floats beyond this count are not trustworthy.
inline constexpr std::size_t kFloatReliableDigits = 40;

enum class Backend { exact, floating };

struct DigitSequence {
    std::vector<std::int64_t> digits;
    /// The orbit reached 0: the expansion is finite.
    bool terminated = false;
    /// Float backend only: more digits were produced than kFloatReliableDigits.
    bool precision_exhausted = false;

    std::size_t size() const noexcept { return digits.size(); }
    bool empty() const noexcept { return digits.empty(); }
    std::int64_t operator[](std::size_t i) const { return digits[i]; }
};

struct ConvergentPair {
    QTheta p;
    QTheta q;
    std::size_t n = 0;
};

/// Fundamental interval of a digit prefix, the set of points whose greedy
/// expansion starts with these digits.
///
/// The endpoint reached with tail theta never belongs to the cylinder (it is
/// the tail-0 endpoint of a neighbour). The endpoint reached with tail 0
/// belongs to it unless n >= 2 and the last digit is m: then
/// 1/(a_n theta) = theta and the greedy expansion carries a_{n-1} + 1 instead.
struct Cylinder {
    std::vector<std::int64_t> digits;
    QTheta lower;
    QTheta upper;
    bool lower_closed = false;
    bool upper_closed = true;

    /// Lebesgue length divided by theta.
    QTheta normalized_length() const { return (upper - lower) * QTheta::theta(lower.m()).reciprocal(); }

    bool contains(const QTheta& x) const {
        const bool above = lower_closed ? lower <= x : lower < x;
        const bool below = upper_closed ? x <= upper : x < upper;
        return above && below;
    }
};

struct ExactOrbit {
    DigitSequence digits;
    /// points[k] = T^k(x); points.size() == digits.size() + 1.
    std::vector<QTheta> points;
};

namespace detail {

inline void check_params(const QTheta& x, const ThetaParams& params) {
    if (x.m() != params.m()) throw validation_error("Q(theta) number built for a different m");
}

inline void check_domain(const QTheta& x, const ThetaParams& params) {
    check_params(x, params);
    if (x.sign() < 0 || x > QTheta::theta(params.m())) {
        throw domain_error("point " + x.to_string() + " lies outside [0, theta]");
    }
}

inline double check_domain(double x, const ThetaParams& params) {
    const double th = params.theta();
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * th;
    if (!(x >= -slack && x <= th + slack)) {
        throw domain_error("point " + std::to_string(x) + " lies outside [0, theta]");
    }
    return std::min(std::max(x, 0.0), th);
}

/// (a*theta) * x, cheaper than a general product.
inline QTheta times_digit_theta(const QTheta& x, std::int64_t a) {
    const BigRational ar(a);
    return QTheta(x.m(), ar * x.b() / x.m(), ar * x.a());
}

inline std::int64_t to_digit(const BigInt& v) {
    if (v > BigInt(std::numeric_limits<std::int64_t>::max() - 1)) {
        throw numerical_error("digit exceeds the 64-bit range");
    }
    return v.convert_to<std::int64_t>();
}

}  // namespace detail

inline void validate_digits(std::span<const std::int64_t> digits, const ThetaParams& params) {
    for (std::size_t k = 0; k < digits.size(); ++k) {
        if (digits[k] < params.m() || digits[k] == kInfiniteDigit) {
            throw validation_error("digit a_" + std::to_string(k + 1) + " = " + std::to_string(digits[k]) +
                                   " is below m = " + std::to_string(params.m()));
        }
    }
}

/// floor(1/(x theta)) for x > 0, kInfiniteDigit for x = 0.
inline std::int64_t digit_index(const QTheta& x, const ThetaParams& params) {
    detail::check_domain(x, params);
    if (x.is_zero()) return kInfiniteDigit;
    return detail::to_digit((x * QTheta::theta(params.m())).reciprocal().floor());
}

struct FloatStep {
    std::int64_t digit;
    double next;
};

/// One float step of the map. Rounding is corrected so that the image stays in
/// [0, theta] and the digit stays >= m. A digit of kInfiniteDigit means x was 0
/// or so small that 1/(x theta) leaves the 64-bit range.
inline FloatStep float_step(double x, const ThetaParams& params) {
    const double th = params.theta();
    if (x <= 0.0) return {kInfiniteDigit, 0.0};
    const double inv = 1.0 / x;
    const double y = inv / th;
    if (!(y < 4.0e18)) return {kInfiniteDigit, 0.0};
    auto a = static_cast<std::int64_t>(std::floor(y));
    if (a < params.m()) a = params.m();
    double r = inv - th * static_cast<double>(a);
    if (r < 0.0 && a > params.m()) {
        --a;
        r += th;
    } else if (r >= th) {
        ++a;
        r -= th;
    }
    r = std::min(std::max(r, 0.0), th);
    return {a, r};
}

inline std::int64_t digit_index(double x, const ThetaParams& params) {
    x = detail::check_domain(x, params);
    if (x == 0.0) return kInfiniteDigit;
    const FloatStep s = float_step(x, params);
    if (s.digit == kInfiniteDigit) throw numerical_error("digit exceeds the 64-bit range");
    return s.digit;
}

/// T(x) = 1/x - theta*floor(1/(x theta)), T(0) = 0.
inline QTheta gauss_map(const QTheta& x, const ThetaParams& params) {
    const std::int64_t a = digit_index(x, params);
    if (a == kInfiniteDigit) return x;
    return x.reciprocal() - detail::times_digit_theta(QTheta::rational(params.m(), 1), a);
}

inline double gauss_map(double x, const ThetaParams& params) {
    x = detail::check_domain(x, params);
    if (x == 0.0) return 0.0;
    return float_step(x, params).next;
}

/// Exact orbit of x: digits and iterates up to n_max steps or termination.
inline ExactOrbit exact_orbit(const QTheta& x, std::size_t n_max, const ThetaParams& params) {
    detail::check_domain(x, params);
    if (x.is_zero()) throw domain_error("expansion needs a point in (0, theta]");
    ExactOrbit orbit;
    orbit.points.reserve(n_max + 1);
    orbit.points.push_back(x);
    for (std::size_t k = 0; k < n_max; ++k) {
        const QTheta& cur = orbit.points.back();
        if (cur.is_zero()) {
            orbit.digits.terminated = true;
            break;
        }
        const QTheta inv = cur.reciprocal();
        // inv / theta = inv * (m theta)
        const QTheta scaled(params.m(), inv.b(), inv.a() * params.m());
        const std::int64_t a = detail::to_digit(scaled.floor());
        orbit.digits.digits.push_back(a);
        orbit.points.push_back(inv - detail::times_digit_theta(QTheta::rational(params.m(), 1), a));
    }
    if (orbit.points.back().is_zero()) orbit.digits.terminated = true;
    return orbit;
}

inline DigitSequence expand(const QTheta& x, std::size_t n_max, const ThetaParams& params) {
    if (n_max == 0) throw validation_error("n_max must be at least 1");
    return exact_orbit(x, n_max, params).digits;
}

inline DigitSequence expand(double x, std::size_t n_max, const ThetaParams& params) {
    if (n_max == 0) throw validation_error("n_max must be at least 1");
    x = detail::check_domain(x, params);
    if (x <= 0.0) throw domain_error("expansion needs a point in (0, theta]");
    DigitSequence seq;
    for (std::size_t k = 0; k < n_max; ++k) {
        if (x == 0.0) {
            seq.terminated = true;
            break;
        }
        const FloatStep s = float_step(x, params);
        if (s.digit == kInfiniteDigit) {
            seq.precision_exhausted = true;
            break;
        }
        seq.digits.push_back(s.digit);
        x = s.next;
    }
    if (x == 0.0) seq.terminated = true;
    if (seq.digits.size() > kFloatReliableDigits) seq.precision_exhausted = true;
    return seq;
}

inline DigitSequence expand(const QTheta& x, std::size_t n_max, const ThetaParams& params, Backend backend) {
    return backend == Backend::exact ? expand(x, n_max, params) : expand(x.to_double(), n_max, params);
}

/// (p_n, q_n) for n = 1..len, from p_{-1}=1, p_0=0, q_{-1}=0, q_0=1.
inline std::vector<ConvergentPair> convergents(std::span<const std::int64_t> digits, const ThetaParams& params) {
    validate_digits(digits, params);
    const std::int64_t m = params.m();
    std::vector<ConvergentPair> out;
    out.reserve(digits.size());
    QTheta p_prev = QTheta::rational(m, 1), p = QTheta::rational(m, 0);
    QTheta q_prev = QTheta::rational(m, 0), q = QTheta::rational(m, 1);
    for (std::size_t k = 0; k < digits.size(); ++k) {
        QTheta p_next = detail::times_digit_theta(p, digits[k]) + p_prev;
        QTheta q_next = detail::times_digit_theta(q, digits[k]) + q_prev;
        p_prev = std::move(p);
        q_prev = std::move(q);
        p = std::move(p_next);
        q = std::move(q_next);
        out.push_back({p, q, k + 1});
    }
    return out;
}

inline std::vector<ConvergentPair> convergents(const DigitSequence& digits, const ThetaParams& params) {
    return convergents(std::span<const std::int64_t>(digits.digits), params);
}

/// (p_n + t p_{n-1}) / (q_n + t q_{n-1}).
inline QTheta reconstruct(std::span<const std::int64_t> digits, const QTheta& tail, const ThetaParams& params) {
    if (digits.empty()) throw validation_error("reconstruction needs at least one digit");
    detail::check_domain(tail, params);
    const auto conv = convergents(digits, params);
    const std::size_t n = conv.size();
    const QTheta p_prev = n >= 2 ? conv[n - 2].p : QTheta::rational(params.m(), 0);
    const QTheta q_prev = n >= 2 ? conv[n - 2].q : QTheta::rational(params.m(), 1);
    return (conv[n - 1].p + tail * p_prev) / (conv[n - 1].q + tail * q_prev);
}

inline QTheta reconstruct(std::span<const std::int64_t> digits, const ThetaParams& params) {
    return reconstruct(digits, QTheta::rational(params.m(), 0), params);
}

/// Float evaluation by the backward recursion y <- 1/(a_k theta + y).
inline double reconstruct(std::span<const std::int64_t> digits, double tail, const ThetaParams& params) {
    if (digits.empty()) throw validation_error("reconstruction needs at least one digit");
    validate_digits(digits, params);
    double y = detail::check_domain(tail, params);
    for (std::size_t k = digits.size(); k-- > 0;) {
        y = 1.0 / (static_cast<double>(digits[k]) * params.theta() + y);
    }
    return y;
}

/// x - p_n/q_n, checked against (-1)^n T^n(x) / (q_n (q_n + T^n(x) q_{n-1})).
///
/// With p_n q_{n-1} - p_{n-1} q_n = (-1)^{n+1} the error carries the sign (-1)^n:
/// odd convergents lie above x.
inline QTheta approximation_error(const QTheta& x, std::size_t n, const ThetaParams& params) {
    if (n == 0) throw validation_error("approximation error needs n >= 1");
    const ExactOrbit orbit = exact_orbit(x, n, params);
    if (orbit.digits.size() < n) {
        throw termination_error("expansion terminated after " + std::to_string(orbit.digits.size()) +
                                " digits, before n = " + std::to_string(n));
    }
    const auto conv = convergents(orbit.digits, params);
    const QTheta& p = conv[n - 1].p;
    const QTheta& q = conv[n - 1].q;
    const QTheta q_prev = n >= 2 ? conv[n - 2].q : QTheta::rational(params.m(), 1);
    const QTheta& tail = orbit.points[n];
    QTheta direct = x - p / q;
    QTheta identity = tail / (q * (q + tail * q_prev));
    if (n % 2 == 1) identity = -identity;
    if (direct != identity) throw numerical_error("approximation error identity failed at n = " + std::to_string(n));
    return direct;
}

inline Cylinder cylinder(std::span<const std::int64_t> digits, const ThetaParams& params) {
    if (digits.empty()) throw validation_error("a cylinder needs at least one digit");
    const QTheta at_zero = reconstruct(digits, QTheta::rational(params.m(), 0), params);
    const QTheta at_theta = reconstruct(digits, QTheta::theta(params.m()), params);
    Cylinder c;
    c.digits.assign(digits.begin(), digits.end());
    const bool keeps_tail_zero_end = digits.size() == 1 || digits.back() > params.m();
    if (at_zero > at_theta) {
        c.lower = at_theta;
        c.upper = at_zero;
        c.upper_closed = keeps_tail_zero_end;
        c.lower_closed = false;
    } else {
        c.lower = at_zero;
        c.upper = at_theta;
        c.lower_closed = keeps_tail_zero_end;
        c.upper_closed = false;
    }
    return c;
}

inline Cylinder cylinder(const DigitSequence& digits, const ThetaParams& params) {
    return cylinder(std::span<const std::int64_t>(digits.digits), params);
}

/// 1/(q_n (q_n + theta q_{n-1})), the normalized measure of the rank-n cylinder.
inline QTheta cylinder_measure_from_convergents(const QTheta& q, const QTheta& q_prev) {
    return (q * (q + QTheta::theta(q.m()) * q_prev)).reciprocal();
}

}  // namespace thetacf
