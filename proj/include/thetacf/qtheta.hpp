#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

#include <boost/multiprecision/gmp.hpp>

#include "thetacf/errors.hpp"
#include "thetacf/params.hpp"

namespace thetacf {

using BigInt = boost::multiprecision::mpz_int;
using BigRational = boost::multiprecision::mpq_rational;

namespace detail {

inline constexpr double kLn2 = 0.69314718055994530942;

/// log|z| for a nonzero big integer, without overflow.
inline double log_abs(const BigInt& z) {
    long exp = 0;
    const double mant = mpz_get_d_2exp(&exp, z.backend().data());
    return std::log(std::fabs(mant)) + static_cast<double>(exp) * kLn2;
}

inline double log_abs(const BigRational& r) {
    return log_abs(boost::multiprecision::numerator(r)) - log_abs(boost::multiprecision::denominator(r));
}

inline BigInt floor_div(const BigInt& num, const BigInt& den) {
    BigInt q;
    mpz_fdiv_q(q.backend().data(), num.backend().data(), den.backend().data());
    return q;
}

inline BigInt floor(const BigRational& r) {
    return floor_div(boost::multiprecision::numerator(r), boost::multiprecision::denominator(r));
}

/// log(e^x + e^y) for finite x, y.
inline double log_add(double x, double y) {
    if (x < y) std::swap(x, y);
    return x + std::log1p(std::exp(y - x));
}

}  // namespace detail

/// Parses "p/q", an integer, or a plain decimal such as "-0.125" into an exact rational.
inline BigRational parse_rational(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    if (text.empty()) throw validation_error("empty rational");
    auto parse_int = [&](std::string_view s) {
        s = trim(s);
        std::size_t start = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
        if (start == s.size()) throw validation_error("malformed number '" + std::string(text) + "'");
        for (std::size_t i = start; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') throw validation_error("malformed number '" + std::string(text) + "'");
        }
        std::string digits(s[0] == '+' ? s.substr(1) : s);
        return BigInt(digits);
    };
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        BigInt num = parse_int(text.substr(0, slash));
        BigInt den = parse_int(text.substr(slash + 1));
        if (den == 0) throw validation_error("zero denominator in '" + std::string(text) + "'");
        return BigRational(num, den);
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string_view whole = text.substr(0, dot);
        std::string_view frac = text.substr(dot + 1);
        bool negative = !whole.empty() && whole[0] == '-';
        if (!whole.empty() && (whole[0] == '-' || whole[0] == '+')) whole.remove_prefix(1);
        if (whole.empty() && frac.empty()) throw validation_error("malformed number '" + std::string(text) + "'");
        BigInt w = whole.empty() ? BigInt(0) : parse_int(whole);
        BigInt f = frac.empty() ? BigInt(0) : parse_int(frac);
        if (!frac.empty() && (frac[0] == '-' || frac[0] == '+')) {
            throw validation_error("malformed number '" + std::string(text) + "'");
        }
        BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(frac.size()));
        BigRational r(w * scale + f, scale);
        return negative ? BigRational(-r) : r;
    }
    return BigRational(parse_int(text));
}

inline std::string to_string(const BigRational& r) { return r.str(); }

/// An exact element a + b*theta of the quadratic field Q(theta), theta^2 = 1/m.
///
/// Coefficients are GMP rationals, always kept in lowest terms, so two numbers
/// are equal exactly when their coefficient pairs are. Numbers belonging to
/// different m cannot be mixed.
class QTheta {
public:
    QTheta() = default;
    explicit QTheta(std::int64_t m, BigRational a = 0, BigRational b = 0)
        : m_(m), a_(std::move(a)), b_(std::move(b)) {}
    QTheta(const ThetaParams& p, BigRational a, BigRational b = 0) : QTheta(p.m(), std::move(a), std::move(b)) {}

    static QTheta rational(std::int64_t m, BigRational r) { return QTheta(m, std::move(r), 0); }
    static QTheta theta(std::int64_t m) { return QTheta(m, 0, 1); }

    std::int64_t m() const noexcept { return m_; }
    const BigRational& a() const noexcept { return a_; }
    const BigRational& b() const noexcept { return b_; }
    bool is_zero() const { return a_ == 0 && b_ == 0; }
    bool is_rational() const { return b_ == 0; }

    /// Exact sign of a + b/sqrt(m).
    int sign() const {
        const int sa = a_.sign();
        const int sb = b_.sign();
        if (sb == 0) return sa;
        if (sa == 0 || sa == sb) return sb;
        const BigRational a2 = a_ * a_;
        const BigRational b2 = b_ * b_ / m_;
        return a2 > b2 ? sa : sb;
    }

    /// a^2 - b^2/m, the field norm (product with the conjugate).
    BigRational norm() const { return a_ * a_ - b_ * b_ / m_; }
    QTheta conjugate() const { return QTheta(m_, a_, -b_); }

    QTheta reciprocal() const {
        if (is_zero()) throw numerical_error("reciprocal of zero in Q(theta)");
        const BigRational n = norm();
        return QTheta(m_, a_ / n, -b_ / n);
    }

    QTheta operator-() const { return QTheta(m_, -a_, -b_); }

    QTheta& operator+=(const QTheta& o) {
        check_same(o);
        a_ += o.a_;
        b_ += o.b_;
        return *this;
    }
    QTheta& operator-=(const QTheta& o) {
        check_same(o);
        a_ -= o.a_;
        b_ -= o.b_;
        return *this;
    }
    QTheta& operator*=(const QTheta& o) {
        check_same(o);
        BigRational na = a_ * o.a_ + b_ * o.b_ / m_;
        BigRational nb = a_ * o.b_ + b_ * o.a_;
        a_ = std::move(na);
        b_ = std::move(nb);
        return *this;
    }
    QTheta& operator/=(const QTheta& o) { return *this *= o.reciprocal(); }

    QTheta& operator+=(const BigRational& r) {
        a_ += r;
        return *this;
    }
    QTheta& operator*=(const BigRational& r) {
        a_ *= r;
        b_ *= r;
        return *this;
    }

    friend QTheta operator+(QTheta x, const QTheta& y) { return x += y; }
    friend QTheta operator-(QTheta x, const QTheta& y) { return x -= y; }
    friend QTheta operator*(QTheta x, const QTheta& y) { return x *= y; }
    friend QTheta operator/(QTheta x, const QTheta& y) { return x /= y; }
    friend QTheta operator+(QTheta x, const BigRational& r) { return x += r; }
    friend QTheta operator-(QTheta x, const BigRational& r) { return x += BigRational(-r); }
    friend QTheta operator*(QTheta x, const BigRational& r) { return x *= r; }
    friend QTheta operator*(const BigRational& r, QTheta x) { return x *= r; }

    friend bool operator==(const QTheta& x, const QTheta& y) {
        return x.m_ == y.m_ && x.a_ == y.a_ && x.b_ == y.b_;
    }
    friend std::strong_ordering operator<=>(const QTheta& x, const QTheta& y) {
        const int s = (x - y).sign();
        return s < 0 ? std::strong_ordering::less : (s > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
    }

    /// Largest integer not exceeding the value, by integer square roots and exact comparison only.
    BigInt floor() const {
        const BigInt fa = detail::floor(a_);
        BigInt fb = 0;
        if (b_ != 0) {
            // floor(sqrt(y)) == isqrt(floor(y)) for y >= 0; y = b^2/m is never a perfect square.
            const BigRational y = b_ * b_ / m_;
            const BigInt root = boost::multiprecision::sqrt(detail::floor(y));
            fb = b_ > 0 ? root : BigInt(-root - 1);
        }
        // value lies in [fa + fb, fa + fb + 2)
        const BigInt lo = fa + fb;
        const QTheta shifted = *this - BigRational(lo + 1);
        return shifted.sign() >= 0 ? BigInt(lo + 1) : lo;
    }

    /// Natural log of |value|; -infinity for zero. Cancellation-free via the norm.
    double log_abs() const {
        if (is_zero()) return -std::numeric_limits<double>::infinity();
        const double log_theta = -0.5 * std::log(static_cast<double>(m_));
        if (b_ == 0) return detail::log_abs(a_);
        if (a_ == 0) return detail::log_abs(b_) + log_theta;
        const double la = detail::log_abs(a_);
        const double lb = detail::log_abs(b_) + log_theta;
        const double sum = detail::log_add(la, lb);  // log(|a| + |b| theta)
        if (a_.sign() == b_.sign()) return sum;
        return detail::log_abs(norm()) - sum;
    }

    double to_double() const {
        const int s = sign();
        if (s == 0) return 0.0;
        const double la = a_ == 0 ? -1e300 : detail::log_abs(a_);
        const double lb = b_ == 0 ? -1e300 : detail::log_abs(b_);
        if (la < 600 && lb < 600 && la > -600 && lb > -600) {
            const long double th = 1.0L / std::sqrt(static_cast<long double>(m_));
            const long double ad = a_.convert_to<long double>();
            const long double bd = b_.convert_to<long double>();
            if (a_.sign() == b_.sign()) return static_cast<double>(ad + bd * th);
            const BigRational n = norm();
            const double ln = detail::log_abs(n);
            if (ln < 600 && ln > -600) {
                return static_cast<double>(n.convert_to<long double>() / (ad - bd * th));
            }
        }
        return s * std::exp(log_abs());
    }

    std::string to_string() const { return a_.str() + " + " + b_.str() + "*theta"; }
    friend std::ostream& operator<<(std::ostream& os, const QTheta& x) { return os << x.to_string(); }

private:
    void check_same(const QTheta& o) const {
        if (o.m_ != m_) throw validation_error("mixing Q(theta) numbers with different m");
    }

    std::int64_t m_ = 2;
    BigRational a_ = 0;
    BigRational b_ = 0;
};

inline BigInt floor_qtheta(const QTheta& x) { return x.floor(); }

/// The symbolic theta for the given parameters.
inline QTheta theta_exact(const ThetaParams& p) { return QTheta::theta(p.m()); }

}  // namespace thetacf
