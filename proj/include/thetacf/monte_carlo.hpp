#pragma once

// Orbit sampling and empirical ergodic averages.
//
// Exact orbits start from random rationals and give Levy and approximation
// statistics with exact bound checks. Float orbits are only used for digit
// statistics: individual float digit strings drift away from the true ones,
// but they keep the invariant distribution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "thetacf/errors.hpp"
#include "thetacf/expansion.hpp"
#include "thetacf/measure.hpp"
#include "thetacf/params.hpp"
#include "thetacf/qtheta.hpp"

namespace thetacf {

inline constexpr std::int64_t kMaxSeedDenominator = 1'000'000;

/// Seed plus the (fixed) generator family. Every orbit k draws from its own
/// stream, seeded by splitmix64 applied to (seed, k).
struct RngConfig {
    std::uint64_t seed = 42;
    std::string family = "splitmix64/mt19937_64";
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of sub-stream `index` (distinct purposes use distinct `domain` values).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
    std::uint64_t s = seed;
    s = splitmix64(s) ^ (domain * 0xD1B54A32D192ED03ULL);
    s = splitmix64(s) ^ (index * 0x8CB92BA72F3D8DD7ULL);
    return splitmix64(s);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on [0, 1) with 53 random bits; identical on every platform.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi] by rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % span);
    }

private:
    std::mt19937_64 gen_;
};

/// Random rational p/q in (0, theta) with q <= max_den, checked exactly (p^2 m < q^2).
inline BigRational random_rational_seed(RandomStream& rng, const ThetaParams& params,
                                        std::int64_t max_den = kMaxSeedDenominator) {
    if (max_den < 2) throw validation_error("seed denominator bound must be at least 2");
    while (true) {
        const std::int64_t q = rng.uniform_int(2, max_den);
        const auto p_max = static_cast<std::int64_t>(std::floor(static_cast<double>(q) * params.theta()));
        if (p_max < 1) continue;
        const std::int64_t p = rng.uniform_int(1, p_max);
        if (BigInt(p) * p * params.m() < BigInt(q) * q) return BigRational(p, q);
    }
}

/// Digits of an orbit together with its points.
struct OrbitSample {
    DigitSequence digits;
    std::vector<QTheta> exact_points;
    std::vector<double> float_points;
    /// Float orbits: number of restarts after the orbit hit 0 or left the digit range.
    std::size_t restarts = 0;
};

inline OrbitSample sample_orbit(const QTheta& x0, std::size_t length, const ThetaParams& params) {
    ExactOrbit orbit = exact_orbit(x0, length, params);
    return {std::move(orbit.digits), std::move(orbit.points), {}, 0};
}

/// Float orbit of `length` digits. When the orbit hits 0 (or a digit beyond the
/// 64-bit range) it restarts from a fresh uniform point, and the restart is counted.
inline OrbitSample sample_orbit(double x0, std::size_t length, const ThetaParams& params, RandomStream& rng,
                                bool keep_points = false) {
    x0 = detail::check_domain(x0, params);
    OrbitSample out;
    out.digits.digits.reserve(length);
    if (keep_points) out.float_points.reserve(length + 1);
    double x = x0;
    auto fresh = [&] {
        double u = 0.0;
        while (u == 0.0) u = rng.uniform();
        return u * params.theta();
    };
    if (x == 0.0) {
        x = fresh();
        ++out.restarts;
    }
    if (keep_points) out.float_points.push_back(x);
    while (out.digits.size() < length) {
        const FloatStep s = float_step(x, params);
        if (s.digit == kInfiniteDigit) {
            x = fresh();
            ++out.restarts;
            continue;
        }
        out.digits.digits.push_back(s.digit);
        x = s.next == 0.0 ? (++out.restarts, fresh()) : s.next;
        if (keep_points) out.float_points.push_back(x);
    }
    out.digits.precision_exhausted = length > kFloatReliableDigits;
    return out;
}

/// Float orbit from a uniform starting point.
inline OrbitSample sample_orbit(std::size_t length, const ThetaParams& params, RandomStream& rng) {
    double u = 0.0;
    while (u == 0.0) u = rng.uniform();
    return sample_orbit(u * params.theta(), length, params, rng);
}

/// Everything the exact statistics need from one orbit, with the exact bound checks.
struct ExactOrbitStatistics {
    std::size_t n = 0;
    bool terminated = false;
    /// -(1/n) log lambda(I(a_1..a_n)), lambda from 1/(q_n (q_n + theta q_{n-1})).
    double levy = 0.0;
    /// (1/n) log q_n.
    double log_qn_over_n = 0.0;
    /// (1/n) log |x - p_n/q_n|; -infinity if the error is exactly 0.
    double approx_error = 0.0;
    /// 1/((1+theta) q_n^2) < lambda < 1/q_n^2, decided exactly.
    bool measure_sandwich_holds = false;
    /// 1/(q_n (q_{n+1} + theta q_n)) <= |x - p_n/q_n| <= 1/(q_n q_{n+1}); false when q_{n+1} does not exist.
    bool error_bounds_hold = false;
    /// x - p_n/q_n equals (-1)^n T^n x/(q_n (q_n + T^n x q_{n-1})).
    bool error_identity_holds = false;
};

inline ExactOrbitStatistics exact_orbit_statistics(const QTheta& x, std::size_t n, const ThetaParams& params) {
    if (n == 0) throw validation_error("orbit statistics need n >= 1");
    const ExactOrbit orbit = exact_orbit(x, n + 1, params);
    if (orbit.digits.size() < n) {
        throw termination_error("orbit terminated after " + std::to_string(orbit.digits.size()) +
                                " digits, before n = " + std::to_string(n));
    }
    const std::int64_t m = params.m();
    const QTheta th = QTheta::theta(m);
    const QTheta one = QTheta::rational(m, 1);
    const auto conv = convergents(orbit.digits, params);
    const QTheta& p = conv[n - 1].p;
    const QTheta& q = conv[n - 1].q;
    const QTheta q_prev = n >= 2 ? conv[n - 2].q : one;
    const double nd = static_cast<double>(n);

    ExactOrbitStatistics s;
    s.n = n;
    s.terminated = orbit.digits.terminated;

    const QTheta lambda = cylinder_measure_from_convergents(q, q_prev);
    s.levy = -lambda.log_abs() / nd;
    s.log_qn_over_n = q.log_abs() / nd;
    const QTheta q2 = q * q;
    s.measure_sandwich_holds = ((one + th) * q2).reciprocal() < lambda && lambda < q2.reciprocal();

    const QTheta& tail = orbit.points[n];
    const QTheta err = x - p / q;
    QTheta identity = tail / (q * (q + tail * q_prev));
    if (n % 2 == 1) identity = -identity;
    s.error_identity_holds = err == identity;
    s.approx_error = err.is_zero() ? -std::numeric_limits<double>::infinity() : err.log_abs() / nd;
    if (orbit.digits.size() > n) {
        const QTheta& q_next = conv[n].q;
        const QTheta abs_err = err.sign() < 0 ? -err : err;
        s.error_bounds_hold = (q * (q_next + th * q)).reciprocal() <= abs_err && abs_err <= (q * q_next).reciprocal();
    }
    return s;
}

/// -(1/n) log of the normalized measure of the rank-n cylinder containing x.
inline double levy_statistic(const QTheta& x, std::size_t n, const ThetaParams& params) {
    const auto s = exact_orbit_statistics(x, n, params);
    if (!s.measure_sandwich_holds) throw numerical_error("cylinder measure violates its sandwich bounds");
    return s.levy;
}

/// (1/n) log |x - p_n/q_n|.
inline double approx_error_statistic(const QTheta& x, std::size_t n, const ThetaParams& params) {
    const auto s = exact_orbit_statistics(x, n, params);
    if (!s.error_identity_holds) throw numerical_error("approximation error identity failed");
    return s.approx_error;
}

/// exp((1/n) sum_{k<=n} log a_k).
inline double geometric_mean_statistic(std::span<const std::int64_t> digits, std::size_t n) {
    if (n == 0 || n > digits.size()) throw validation_error("geometric mean needs 1 <= n <= number of digits");
    long double s = 0.0L;
    for (std::size_t k = 0; k < n; ++k) s += std::log(static_cast<long double>(digits[k]));
    return static_cast<double>(std::exp(s / static_cast<long double>(n)));
}

/// (a_1 + ... + a_c)/c at every checkpoint c. Digits above `cap` count as `cap` when cap > 0.
inline std::vector<double> arithmetic_mean_statistic(std::span<const std::int64_t> digits,
                                                     const std::vector<std::size_t>& checkpoints,
                                                     std::int64_t cap = 0) {
    std::vector<double> out;
    long double sum = 0.0L;
    std::size_t k = 0;
    for (std::size_t c : checkpoints) {
        if (c == 0 || c > digits.size()) throw validation_error("checkpoint outside the digit stream");
        if (c < k) throw validation_error("checkpoints must be increasing");
        for (; k < c; ++k) sum += static_cast<long double>(cap > 0 ? std::min(digits[k], cap) : digits[k]);
        out.push_back(static_cast<double>(sum / static_cast<long double>(c)));
    }
    return out;
}

/// Mean of min(a, cap) under the invariant law; the limit of the capped partial means.
inline double capped_digit_mean(std::int64_t cap, const ThetaParams& params) {
    if (cap < params.m()) throw validation_error("cap must be at least m");
    long double s = 0.0L;
    for (std::int64_t k = params.m(); k < cap; ++k) s += static_cast<long double>(k) * digit_law(k, params);
    // gamma(a >= cap) = log(1 + 1/cap)/L by telescoping
    s += static_cast<long double>(cap) * std::log1p(1.0 / static_cast<double>(cap)) / params.log_normalizer();
    return static_cast<double>(s);
}

struct HistogramBin {
    std::int64_t k = 0;
    std::uint64_t count = 0;
    double frequency = 0.0;
    double law = 0.0;
    /// sqrt(law (1 - law)/total), the binomial standard error.
    double sigma = 0.0;
    double expected = 0.0;
};

struct DigitHistogram {
    std::uint64_t total = 0;
    /// One bin per k from m to the largest k with expected count >= 1; larger digits go to overflow.
    std::vector<HistogramBin> bins;
    std::uint64_t overflow_count = 0;
    double overflow_law = 0.0;
    /// max |frequency - law| / sigma over bins with expected count >= 25.
    double max_deviation_sigma = 0.0;
    std::int64_t worst_digit = 0;
    std::size_t tested_bins = 0;
    /// max |frequency - law| over all bins.
    double sup_deviation = 0.0;
    /// Two-sided normal threshold at family-wise level 1% over the tested bins. Informational only.
    double bonferroni_sigmas = 0.0;
};

inline constexpr double kMinExpectedCount = 25.0;
inline constexpr std::uint64_t kMinHistogramDigits = 10'000;

inline DigitHistogram digit_frequency(const std::vector<std::vector<std::int64_t>>& orbits, const ThetaParams& params) {
    DigitHistogram h;
    for (const auto& o : orbits) h.total += o.size();
    if (h.total < kMinHistogramDigits) {
        throw validation_error("digit histogram needs at least " + std::to_string(kMinHistogramDigits) + " digits (got " +
                               std::to_string(h.total) + ")");
    }
    const double total = static_cast<double>(h.total);
    const std::int64_t m = params.m();
    // last k with expected count >= 1: log(1 + 1/(k(k+2)))/L ~ 1/(k^2 L)
    std::int64_t k_max = m;
    while (digit_law(k_max + 1, params) * total >= 1.0) ++k_max;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(k_max - m + 1), 0);
    for (const auto& o : orbits) {
        for (std::int64_t a : o) {
            if (a < m) throw validation_error("digit below m in orbit");
            if (a > k_max) {
                ++h.overflow_count;
            } else {
                ++counts[static_cast<std::size_t>(a - m)];
            }
        }
    }
    h.overflow_law = std::log1p(1.0 / static_cast<double>(k_max + 1)) / params.log_normalizer();
    for (std::int64_t k = m; k <= k_max; ++k) {
        HistogramBin b;
        b.k = k;
        b.count = counts[static_cast<std::size_t>(k - m)];
        b.frequency = static_cast<double>(b.count) / total;
        b.law = digit_law(k, params);
        b.sigma = std::sqrt(b.law * (1 - b.law) / total);
        b.expected = b.law * total;
        const double dev = std::fabs(b.frequency - b.law);
        h.sup_deviation = std::max(h.sup_deviation, dev);
        if (b.expected >= kMinExpectedCount) {
            ++h.tested_bins;
            const double z = dev / b.sigma;
            if (z > h.max_deviation_sigma) {
                h.max_deviation_sigma = z;
                h.worst_digit = k;
            }
        }
        h.bins.push_back(b);
    }
    if (h.tested_bins > 0) {
        const boost::math::normal_distribution<double> normal;
        h.bonferroni_sigmas = boost::math::quantile(normal, 1.0 - 0.01 / (2.0 * static_cast<double>(h.tested_bins)));
    }
    return h;
}

struct ErgodicConfig {
    std::int64_t m = 2;
    std::size_t exact_seeds = 20;
    std::size_t exact_length = 200;
    std::size_t float_orbits = 10;
    std::size_t float_length = 100'000;
    std::vector<std::size_t> checkpoints = {1'000, 10'000, 100'000};
    /// Digit cap of the capped-mean negative control.
    std::int64_t cap = 100;
    RngConfig rng;
    double tolerance = kDefaultConstantsTolerance;
    std::size_t workers = 1;

    void validate() const {
        ThetaParams::create(m);
        if (exact_seeds == 0) throw validation_error("number of exact seeds must be positive");
        if (exact_length == 0) throw validation_error("exact orbit length must be positive");
        if (exact_length > 5000) throw validation_error("exact orbit length is limited to 5000");
        if (float_orbits == 0) throw validation_error("number of float orbits must be positive");
        if (float_length == 0) throw validation_error("float orbit length must be positive");
        if (float_length > 1'000'000) throw validation_error("float orbit length is limited to 10^6");
        if (float_orbits * float_length < kMinHistogramDigits) {
            throw validation_error("float orbits must provide at least " + std::to_string(kMinHistogramDigits) + " digits");
        }
        if (checkpoints.empty()) throw validation_error("at least one checkpoint is needed");
        for (std::size_t k = 0; k < checkpoints.size(); ++k) {
            if (checkpoints[k] == 0 || checkpoints[k] > float_length) {
                throw validation_error("checkpoints must lie in [1, float orbit length]");
            }
            if (k > 0 && checkpoints[k] <= checkpoints[k - 1]) throw validation_error("checkpoints must increase");
        }
        if (cap < m) throw validation_error("digit cap must be at least m");
        if (!(tolerance > 0.0 && tolerance <= 1e-6)) throw validation_error("tolerance must lie in (0, 1e-6]");
        if (workers == 0 || workers > 256) throw validation_error("workers must lie in [1, 256]");
    }
};

/// Engineering tolerances for the empirical limits (none are implied by the limit theorems).
inline constexpr double kLevyRelTolerance = 0.05;
inline constexpr double kGeoMeanRelTolerance = 0.02;
inline constexpr double kHistogramSigmas = 3.0;

struct ErgodicReport {
    ErgodicConfig config;
    double theta = 0.0;
    Estimate beta;
    Estimate beta_check;
    Estimate khintchin;

    std::vector<std::string> exact_seeds;
    std::vector<ExactOrbitStatistics> exact;
    std::size_t exact_terminated = 0;
    double levy_estimate = 0.0;
    double levy_reference = 0.0;
    double levy_rel_deviation = 0.0;
    double log_qn_estimate = 0.0;
    double approx_error_estimate = 0.0;
    double approx_error_reference = 0.0;
    double approx_error_rel_deviation = 0.0;
    bool exact_bounds_hold = false;

    std::uint64_t float_digits = 0;
    std::size_t float_restarts = 0;
    double geo_mean = 0.0;
    double geo_mean_rel_deviation = 0.0;
    /// Per checkpoint: median over orbits of the partial means, and the pooled mean.
    std::vector<double> arith_mean_trend;
    std::vector<double> arith_mean_pooled;
    std::vector<double> capped_mean_trend;
    double capped_mean_limit = 0.0;
    DigitHistogram histogram;

    bool levy_within_tolerance = false;
    bool approx_error_within_tolerance = false;
    bool geo_mean_within_tolerance = false;
    bool histogram_within_tolerance = false;
    bool arith_mean_increasing = false;
};

namespace detail {

template <class Job>
void run_indexed(std::size_t count, std::size_t workers, Job&& job) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) job(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline constexpr std::uint64_t kExactSeedDomain = 1;
inline constexpr std::uint64_t kFloatOrbitDomain = 2;

inline ErgodicReport run_ergodic(const ErgodicConfig& config) {
    config.validate();
    const ThetaParams params = ThetaParams::create(config.m);
    ErgodicReport r;
    r.config = config;
    r.theta = params.theta();
    r.beta = levy_beta(params, config.tolerance);
    r.beta_check = levy_beta_tanh_sinh(params, config.tolerance);
    r.khintchin = khintchin_product(params, config.tolerance);

    // exact orbits
    std::vector<BigRational> seeds(config.exact_seeds);
    r.exact.resize(config.exact_seeds);
    std::vector<char> failed(config.exact_seeds, 0);
    detail::run_indexed(config.exact_seeds, config.workers, [&](std::size_t i) {
        RandomStream rng(derive_seed(config.rng.seed, kExactSeedDomain, i));
        // a seed whose expansion stops before n is replaced by the next draw of the same stream
        for (int attempt = 0; attempt < 100; ++attempt) {
            seeds[i] = random_rational_seed(rng, params);
            try {
                r.exact[i] = exact_orbit_statistics(QTheta::rational(params.m(), seeds[i]), config.exact_length, params);
                return;
            } catch (const termination_error&) {
                continue;
            }
        }
        failed[i] = 1;
    });
    for (char f : failed) {
        if (f) throw numerical_error("could not draw a seed with a long enough expansion");
    }
    long double levy = 0, logq = 0, approx = 0;
    r.exact_bounds_hold = true;
    for (std::size_t i = 0; i < config.exact_seeds; ++i) {
        r.exact_seeds.push_back(seeds[i].str());
        const auto& s = r.exact[i];
        if (s.terminated) ++r.exact_terminated;
        levy += s.levy;
        logq += s.log_qn_over_n;
        approx += s.approx_error;
        r.exact_bounds_hold = r.exact_bounds_hold && s.measure_sandwich_holds && s.error_identity_holds &&
                              (s.error_bounds_hold || s.terminated);
    }
    const long double ns = static_cast<long double>(config.exact_seeds);
    r.levy_estimate = static_cast<double>(levy / ns);
    r.log_qn_estimate = static_cast<double>(logq / ns);
    r.approx_error_estimate = static_cast<double>(approx / ns);
    r.levy_reference = 2 * r.beta.value;
    r.approx_error_reference = -2 * r.beta.value;
    r.levy_rel_deviation = std::fabs(r.levy_estimate - r.levy_reference) / r.levy_reference;
    r.approx_error_rel_deviation =
        std::fabs(r.approx_error_estimate - r.approx_error_reference) / std::fabs(r.approx_error_reference);
    r.levy_within_tolerance = r.levy_rel_deviation <= kLevyRelTolerance;
    r.approx_error_within_tolerance = r.approx_error_rel_deviation <= kLevyRelTolerance;

    // float orbits
    std::vector<OrbitSample> orbits(config.float_orbits);
    detail::run_indexed(config.float_orbits, config.workers, [&](std::size_t i) {
        RandomStream rng(derive_seed(config.rng.seed, kFloatOrbitDomain, i));
        orbits[i] = sample_orbit(config.float_length, params, rng);
    });
    std::vector<std::vector<std::int64_t>> digit_sets;
    long double log_sum = 0;
    std::vector<std::vector<double>> trends, capped;
    for (auto& o : orbits) {
        r.float_restarts += o.restarts;
        for (std::int64_t a : o.digits.digits) log_sum += std::log(static_cast<long double>(a));
        trends.push_back(arithmetic_mean_statistic(o.digits.digits, config.checkpoints));
        capped.push_back(arithmetic_mean_statistic(o.digits.digits, config.checkpoints, config.cap));
        r.float_digits += o.digits.size();
        digit_sets.push_back(std::move(o.digits.digits));
    }
    r.geo_mean = static_cast<double>(std::exp(log_sum / static_cast<long double>(r.float_digits)));
    r.geo_mean_rel_deviation = std::fabs(r.geo_mean - r.khintchin.value) / r.khintchin.value;
    r.geo_mean_within_tolerance = r.geo_mean_rel_deviation <= kGeoMeanRelTolerance;

    for (std::size_t c = 0; c < config.checkpoints.size(); ++c) {
        std::vector<double> at, at_capped;
        long double pooled = 0;
        for (std::size_t i = 0; i < trends.size(); ++i) {
            at.push_back(trends[i][c]);
            at_capped.push_back(capped[i][c]);
            pooled += trends[i][c];
        }
        r.arith_mean_trend.push_back(detail::median(at));
        r.arith_mean_pooled.push_back(static_cast<double>(pooled / static_cast<long double>(trends.size())));
        r.capped_mean_trend.push_back(detail::median(at_capped));
    }
    r.capped_mean_limit = capped_digit_mean(config.cap, params);
    r.arith_mean_increasing = true;
    for (std::size_t c = 1; c < r.arith_mean_trend.size(); ++c) {
        r.arith_mean_increasing = r.arith_mean_increasing && r.arith_mean_trend[c] > r.arith_mean_trend[c - 1];
    }

    r.histogram = digit_frequency(digit_sets, params);
    r.histogram_within_tolerance = r.histogram.max_deviation_sigma <= kHistogramSigmas;
    return r;
}

}  // namespace thetacf
