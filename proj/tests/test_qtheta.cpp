#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "thetacf/qtheta.hpp"

using namespace thetacf;

namespace {

// Oracle: 300 significant decimal digits, independent of the integer-only floor.
using Wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<300>>;

Wide wide_value(const QTheta& x) {
    const Wide th = 1 / boost::multiprecision::sqrt(Wide(x.m()));
    auto conv = [](const BigRational& r) {
        return Wide(boost::multiprecision::numerator(r).str()) / Wide(boost::multiprecision::denominator(r).str());
    };
    return conv(x.a()) + conv(x.b()) * th;
}

BigRational random_rational(std::mt19937_64& rng, std::int64_t span) {
    std::uniform_int_distribution<std::int64_t> num(-span, span);
    std::uniform_int_distribution<std::int64_t> den(1, span);
    return BigRational(num(rng), den(rng));
}

}  // namespace

TEST(ParseRational, AcceptsFractionsIntegersAndDecimals) {
    EXPECT_EQ(parse_rational("1/2"), BigRational(1, 2));
    EXPECT_EQ(parse_rational("6/-4"), BigRational(-3, 2));
    EXPECT_EQ(parse_rational(" 17 "), BigRational(17));
    EXPECT_EQ(parse_rational("0.125"), BigRational(1, 8));
    EXPECT_EQ(parse_rational("-1.5"), BigRational(-3, 2));
    EXPECT_EQ(parse_rational(".5"), BigRational(1, 2));
}

TEST(ParseRational, RejectsMalformedInput) {
    EXPECT_THROW(parse_rational(""), validation_error);
    EXPECT_THROW(parse_rational("1/0"), validation_error);
    EXPECT_THROW(parse_rational("abc"), validation_error);
    EXPECT_THROW(parse_rational("1.-5"), validation_error);
    EXPECT_THROW(parse_rational("."), validation_error);
}

TEST(QTheta, ThetaSquaredIsOneOverM) {
    for (std::int64_t m : {2, 3, 5, 10, 17}) {
        const QTheta th = QTheta::theta(m);
        EXPECT_EQ(th * th, QTheta::rational(m, BigRational(1, m)));
        EXPECT_EQ(th * th * BigRational(m), QTheta::rational(m, 1));
    }
}

TEST(QTheta, CanonicalRepresentation) {
    const QTheta x(3, BigRational(2, 4), BigRational(-6, 9));
    const QTheta y(3, BigRational(1, 2), BigRational(-2, 3));
    EXPECT_EQ(x, y);
    EXPECT_EQ(x.a(), BigRational(1, 2));
    EXPECT_EQ(boost::multiprecision::denominator(x.b()), 3);
}

TEST(QTheta, FieldOperationsAreExact) {
    std::mt19937_64 rng(7);
    for (std::int64_t m : {2, 3, 7}) {
        for (int trial = 0; trial < 200; ++trial) {
            const QTheta x(m, random_rational(rng, 1000), random_rational(rng, 1000));
            const QTheta y(m, random_rational(rng, 1000), random_rational(rng, 1000));
            if (x.is_zero() || y.is_zero()) continue;
            EXPECT_EQ(x * x.reciprocal(), QTheta::rational(m, 1));
            EXPECT_EQ((x + y) - y, x);
            EXPECT_EQ((x * y) / y, x);
            EXPECT_EQ(x * (x + y), x * x + x * y);
            // reciprocal formula (a - b theta)/(a^2 - b^2/m)
            const BigRational n = x.a() * x.a() - x.b() * x.b() / m;
            EXPECT_EQ(x.reciprocal(), QTheta(m, x.a() / n, -x.b() / n));
        }
    }
}

TEST(QTheta, ReciprocalOfZeroThrows) { EXPECT_THROW(QTheta(2).reciprocal(), numerical_error); }

TEST(QTheta, MixingFieldsThrows) { EXPECT_THROW(QTheta::theta(2) + QTheta::theta(3), validation_error); }

TEST(QTheta, FloorExamples) {
    EXPECT_EQ(floor_qtheta(QTheta::rational(2, 3)), 3);
    EXPECT_EQ(floor_qtheta(QTheta(2, 0, 4)), 2);   // 4/sqrt(2) = 2.828...
    EXPECT_EQ(floor_qtheta(QTheta(2, 1, -1)), 0);  // 1 - 0.707...
    EXPECT_EQ(floor_qtheta(QTheta(2, 0, -4)), -3);
    EXPECT_EQ(floor_qtheta(QTheta::rational(5, BigRational(-7, 2))), -4);
}

TEST(QTheta, FloorSignAndOrderMatchWideOracle) {
    std::mt19937_64 rng(11);
    for (std::int64_t m : {2, 3, 5, 10, 17, 9999}) {
        for (int trial = 0; trial < 300; ++trial) {
            const QTheta x(m, random_rational(rng, 100000), random_rational(rng, 100000));
            const Wide w = wide_value(x);
            EXPECT_EQ(BigInt(floor_qtheta(x)), BigInt(boost::multiprecision::floor(w).convert_to<long long>()));
            EXPECT_EQ(x.sign(), w > 0 ? 1 : (w < 0 ? -1 : 0));
            const QTheta y(m, random_rational(rng, 100000), random_rational(rng, 100000));
            EXPECT_EQ(x < y, w < wide_value(y));
        }
    }
}

TEST(QTheta, FloorNearIntegerBoundaries) {
    // a + b theta just above and below integers: b/sqrt(m) close to an integer.
    for (std::int64_t m : {2, 3, 5}) {
        for (std::int64_t b = 1; b < 3000; b += 7) {
            const QTheta x(m, 0, b);
            const Wide w = wide_value(x);
            EXPECT_EQ(BigInt(floor_qtheta(x)), BigInt(boost::multiprecision::floor(w).convert_to<long long>()));
        }
    }
}

TEST(QTheta, LogAbsSurvivesCancellation) {
    // a + b theta with a ~ -b theta to many digits: continued-fraction-like convergents of sqrt(2).
    const std::int64_t m = 2;
    BigInt p = 1, q = 1;
    for (int k = 0; k < 150; ++k) {
        BigInt np = p + 2 * q;
        BigInt nq = p + q;
        p = np;
        q = nq;
    }
    // p/q ~ sqrt(2) = 2 theta, so p - 2 q theta is tiny.
    const QTheta x(m, BigRational(p), BigRational(-2 * q));
    const Wide w = wide_value(x);
    ASSERT_LT(boost::multiprecision::abs(w), Wide(1e-40));
    EXPECT_NEAR(x.log_abs(), static_cast<double>(boost::multiprecision::log(boost::multiprecision::abs(w))), 1e-12);
    EXPECT_NEAR(x.to_double(), static_cast<double>(w), 1e-14 * std::fabs(static_cast<double>(w)));
}

TEST(QTheta, ToDoubleMatchesOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const QTheta x(5, random_rational(rng, 1000000), random_rational(rng, 1000000));
        const double w = static_cast<double>(wide_value(x));
        EXPECT_NEAR(x.to_double(), w, 1e-14 * std::max(1.0, std::fabs(w)));
    }
}
