#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "thetacf/expansion.hpp"
#include "thetacf/transfer.hpp"

using namespace thetacf;

namespace {

// Non-decreasing piecewise-linear function through random knots. Knots stay
// out of the strip [0, 0.05 theta] that holds the far branches u_i, i > N.
struct PiecewiseLinear {
    std::vector<double> xs;
    std::vector<double> ys;

    double operator()(double x) const {
        if (x <= xs.front()) return ys.front();
        if (x >= xs.back()) return ys.back();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t k = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        return ys[k - 1] + t * (ys[k] - ys[k - 1]);
    }
};

PiecewiseLinear random_monotone(std::mt19937_64& rng, double theta) {
    std::uniform_real_distribution<double> pos(0.05 * theta, theta);
    std::uniform_real_distribution<double> step(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 6);
    PiecewiseLinear f;
    const int k = count(rng);
    f.xs.push_back(0.0);
    for (int i = 0; i < k; ++i) f.xs.push_back(pos(rng));
    f.xs.push_back(theta);
    std::sort(f.xs.begin(), f.xs.end());
    f.xs.erase(std::unique(f.xs.begin(), f.xs.end()), f.xs.end());
    double y = step(rng) - 0.5;
    for (std::size_t i = 0; i < f.xs.size(); ++i) {
        f.ys.push_back(y);
        y += step(rng);
    }
    return f;
}

// Smooth functions with known derivatives on [0, theta].
struct SmoothFamily {
    int kind;
    double a, b, c;
    double operator()(double x) const {
        switch (kind) {
            case 0: return a * std::sin(b * x + c);
            case 1: return a * std::exp(b * x);
            case 2: return a / (1 + std::fabs(b) * x) + c * x * x;
            default: return a * x + b * x * x * x + c;
        }
    }
};

std::vector<SmoothFamily> smooth_family(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<SmoothFamily> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back({static_cast<int>(i % 4), u(rng), u(rng), u(rng)});
    return out;
}

double max_abs_diff(const GridFunction& f, const GridFunction& g) {
    double best = 0.0;
    for (double x : f.dense_grid()) best = std::max(best, std::fabs(f(x) - g(x)));
    return best;
}

}  // namespace

TEST(GridFunction, ReproducesPolynomialsAndDerivatives) {
    const double th = new_params(3).theta();
    const auto f = GridFunction::sample([](double x) { return 1 - 2 * x + 3 * x * x * x; }, 0.0, th, 16);
    const auto df = f.derivative();
    for (double x : f.dense_grid(7)) {
        EXPECT_NEAR(f(x), 1 - 2 * x + 3 * x * x * x, 1e-14);
        EXPECT_NEAR(df(x), -2 + 9 * x * x, 1e-12);
    }
    EXPECT_EQ(f.node(0), 0.0);
    EXPECT_EQ(f.node(16), th);
    const auto c = GridFunction::sample([](double) { return 2.0; }, 0.0, th, 8).chebyshev_coefficients();
    EXPECT_NEAR(c[0], 2.0, 1e-15);
    for (std::size_t k = 1; k < c.size(); ++k) EXPECT_NEAR(c[k], 0.0, 1e-15);
}

TEST(GridFunction, SpectralAccuracyForAnalyticFunctions) {
    const double th = new_params(2).theta();
    const auto f = GridFunction::sample([](double x) { return std::exp(-3 * x) / (1 + x); }, 0.0, th, 64);
    for (double x : f.dense_grid()) {
        EXPECT_NEAR(f(x), std::exp(-3 * x) / (1 + x), 4e-15);
    }
    EXPECT_NEAR(lipschitz_seminorm(f), 4.0, 1e-11);  // |f'(0)| = 3 + 1
}

TEST(OperatorConfig, Validation) {
    const auto p = new_params(2);
    EXPECT_THROW(TransferOperator(p, OperatorConfig{4, 1e-13}), validation_error);
    EXPECT_THROW(TransferOperator(p, OperatorConfig{64, 1e-3}), validation_error);
    EXPECT_THROW(TransferOperator(p, OperatorConfig{64, 0.0}), validation_error);
    EXPECT_NO_THROW(TransferOperator(p, OperatorConfig{8, 1e-6}));
}

TEST(BranchInverse, ExamplesAndMonotonicity) {
    for (std::int64_t m : {2, 3, 10}) {
        const auto p = new_params(m);
        EXPECT_NEAR(branch_inverse(m, 0.0, p), p.theta(), 1e-15);
        for (std::int64_t i = m; i < m + 20; ++i) {
            const double x = 0.3 * p.theta();
            EXPECT_GT(branch_inverse(i, x, p), branch_inverse(i + 1, x, p));
            EXPECT_GT(branch_inverse(i, x, p), branch_inverse(i, x + 0.1 * p.theta(), p));
            // u_i(x) lies in the rank-1 cylinder of digit i
            EXPECT_EQ(digit_index(branch_inverse(i, x, p), p), i);
        }
        EXPECT_THROW(branch_inverse(m - 1, 0.0, p), validation_error);
    }
    const auto p2 = new_params(2);
    EXPECT_NEAR(branch_inverse(2, p2.theta(), p2), 1 / (3 * p2.theta()), 1e-15);
    EXPECT_NEAR(branch_inverse(2, p2.theta(), p2), 0.4714045, 1e-7);
}

TEST(BranchWeight, NormalizationWithClosedFormTail) {
    for (std::int64_t m : {2, 3, 5, 10, 17}) {
        const auto p = new_params(m);
        EXPECT_NEAR(branch_weight(m, 0.0, p), 1.0 / (m + 1), 1e-15);
        const TransferOperator op(p);
        const std::int64_t N = op.cutoff();
        for (double x : op.sample([](double) { return 0.0; }).dense_grid()) {
            long double s = 0;
            for (std::int64_t i = N; i >= m; --i) s += branch_weight(i, x, p);
            s += branch_tail_mass(N, x, p);
            EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-14) << "m=" << m << " x=" << x;
        }
        EXPECT_NEAR(branch_tail_mass(m - 1, 0.3, p), 1.0, 1e-15);
    }
}

TEST(BranchWeight, TailSumsIncreaseOnTheInterval) {
    // sum_{i>=k} P_i(x) = (theta x + 1)/(theta (k theta + x)) is non-decreasing for k >= m,
    // which is what the monotonicity argument for U uses. Single weights near i = m decrease.
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const double th = p.theta();
        EXPECT_NEAR(branch_weight(m, th, p), 1.0 / (m + 2), 1e-15);
        EXPECT_GT(branch_weight(m, 0.0, p), branch_weight(m, th, p));
        for (std::int64_t k = m + 1; k < m + 50; ++k) {
            double prev = 0.0;
            for (int j = 0; j <= 100; ++j) {
                const double v = branch_tail_mass(k - 1, th * j / 100, p);
                EXPECT_GT(v, prev);
                prev = v;
            }
        }
        for (std::int64_t i = 2 * m + 1; i < 2 * m + 50; ++i) {
            double prev = 0.0;
            for (int j = 0; j <= 100; ++j) {
                const double v = branch_weight(i, th * j / 100, p);
                EXPECT_GT(v, prev) << "i=" << i;
                prev = v;
            }
        }
    }
}

TEST(ApplyU, FixesConstants) {
    for (std::int64_t m : {2, 3, 10, 17}) {
        const TransferOperator op(new_params(m));
        for (double c : {1.0, -2.5, 7.0}) {
            const auto f = op.sample([c](double) { return c; });
            const auto uf = op.apply_U(f);
            for (double x : uf.dense_grid()) EXPECT_NEAR(uf(x), c, 1e-12 * std::fabs(c));
        }
    }
}

TEST(ApplyV, FixesInvariantDensityShape) {
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double th = p.theta();
        const auto f = op.sample([th](double x) { return 3.0 / (1 + th * x); });
        const auto vf = op.apply_V(f);
        EXPECT_LE(max_abs_diff(vf, f), 1e-10);
    }
}

TEST(ApplyV, OfOneMatchesDirectSeries) {
    const auto p = new_params(2);
    const TransferOperator op(p);
    const double th = p.theta();
    const auto v1 = op.apply_V(op.sample([](double) { return 1.0; }));
    double prev = 1e300;
    for (int j = 0; j <= 20; ++j) {
        const double x = th * j / 20;
        // sum to K, tail by the midpoint rule: sum_{i>K} (i theta + x)^-2 ~ 1/(theta^2 (K + 1/2 + x/theta))
        const std::int64_t K = 1000000;
        long double s = 0;
        for (std::int64_t i = K; i >= 2; --i) {
            const long double d = i * static_cast<long double>(th) + x;
            s += 1 / (d * d);
        }
        s += 1 / (th * th * (K + 0.5L + x / th));
        EXPECT_NEAR(v1(x), static_cast<double>(s), 1e-12);
        EXPECT_GT(v1(x), 0.0);
        EXPECT_LT(v1(x), prev);
        prev = v1(x);
    }
}

TEST(ApplyU, ReversesMonotonicity) {
    std::mt19937_64 rng(2024);
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        for (int trial = 0; trial < 50; ++trial) {
            const PiecewiseLinear f = random_monotone(rng, p.theta());
            double prev = std::numeric_limits<double>::infinity();
            for (double x : op.sample([](double) { return 0.0; }).nodes()) {
                const double v = op.U(f, x);
                EXPECT_LE(v, prev + 1e-13) << "m=" << m << " trial=" << trial;
                prev = v;
            }
        }
    }
}

TEST(Variation, MonotoneAndConstantFunctions) {
    const double th = new_params(2).theta();
    const auto f = GridFunction::sample([](double x) { return x * x + 1; }, 0.0, th, 32);
    EXPECT_NEAR(variation(f), th * th, 1e-14);
    EXPECT_NEAR(variation_monotone(f, 0.0, th), th * th, 1e-14);
    EXPECT_EQ(variation(GridFunction::sample([](double) { return 4.0; }, 0.0, th, 32)), 0.0);
    // sin(3x) rises to 1 at x = pi/6 < theta, then falls to sin(3 theta)
    const auto s = GridFunction::sample([](double x) { return std::sin(3 * x); }, 0.0, th, 64);
    EXPECT_NEAR(variation(s), 2 - std::sin(3 * th), 1e-6);
    EXPECT_LE(variation(s), 2 - std::sin(3 * th) + 1e-14);
}

TEST(Variation, ContractsByKm) {
    std::mt19937_64 rng(99);
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double km = contraction_km(p).convert_to<double>();
        for (int trial = 0; trial < 50; ++trial) {
            const PiecewiseLinear f = random_monotone(rng, p.theta());
            const double var_f = variation_monotone(f, 0.0, p.theta());
            const double var_uf = variation_monotone([&](double x) { return op.U(f, x); }, 0.0, p.theta());
            EXPECT_LE(var_uf, km * var_f + 1e-10) << "m=" << m << " trial=" << trial;
        }
    }
}

TEST(LipschitzSeminorm, ExamplesAndContraction) {
    const double th2 = new_params(2).theta();
    EXPECT_NEAR(lipschitz_seminorm(GridFunction::sample([](double x) { return x; }, 0.0, th2, 16)), 1.0, 1e-13);
    EXPECT_NEAR(lipschitz_seminorm(GridFunction::sample([](double) { return 5.0; }, 0.0, th2, 16)), 0.0, 1e-11);
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double q = contraction_q(p).value;
        for (const auto& g : smooth_family(60, 5 + m)) {
            const auto f = op.sample(g);
            const double sf = lipschitz_seminorm(f);
            const double suf = lipschitz_seminorm(op.apply_U(f));
            EXPECT_LE(suf, q * sf + 1e-8) << "m=" << m << " kind=" << g.kind;
        }
    }
}

TEST(PowerRelations, VAndSThroughU) {
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double th = p.theta();
        const auto f = op.sample([](double x) { return std::cos(3 * x) + x; });
        for (std::size_t n : {1u, 2u, 3u}) {
            EXPECT_LE(max_abs_diff(op.apply_V_power(f, n), op.V_power_via_U(f, n)), 1e-10);
        }
        const auto h = op.sample([](double x) { return 0.5 + x * x; });
        const auto s1 = op.apply_S(f, h);
        EXPECT_LE(max_abs_diff(op.apply_S(s1, h), op.S_power_via_U(f, h, 2)), 1e-10);
        EXPECT_LE(max_abs_diff(op.apply_S_power(f, h, 2), op.apply_S(s1, h)), 1e-15);
        // S under the invariant density fixes constants; under h = 1 it is V
        const auto inv = op.sample([&](double x) { return invariant_density(x, p); });
        const auto one = op.sample([](double) { return 1.0; });
        EXPECT_LE(max_abs_diff(op.apply_S(one, inv), one), 1e-12);
        EXPECT_LE(max_abs_diff(op.apply_S(f, one), op.apply_V(f)), 1e-13);
        (void)th;
    }
    const TransferOperator op(new_params(2));
    const auto zero = op.sample([](double x) { return x - 0.2; });
    EXPECT_THROW(op.apply_S(zero, zero), numerical_error);
}

TEST(MarkovTransition, ExactExamples) {
    for (std::int64_t m : {2, 3, 10}) {
        const auto p = new_params(m);
        const QTheta th = QTheta::theta(m);
        const QTheta zero(m);
        const QTheta x = QTheta::rational(m, BigRational(1, 7)) * th;
        EXPECT_NEAR(markov_transition(x, {ExactInterval{zero, th, true, true}}, p), 1.0, 1e-15);
        EXPECT_EQ(markov_transition(x, {}, p), 0.0);
        // I(m) = (1/((m+1) theta), theta]
        const QTheta left = (th * BigRational(m + 1)).reciprocal();
        const ExactInterval cyl{left, th, false, true};
        EXPECT_NEAR(markov_transition(zero, {cyl}, p), 1.0 / (m + 1), 1e-15);
        // closing the left end adds the branch u_{m+1}(0) = left
        const ExactInterval closed{left, th, true, true};
        EXPECT_NEAR(markov_transition(zero, {closed}, p), branch_weight(m, 0.0, p) + branch_weight(m + 1, 0.0, p), 1e-15);
        EXPECT_THROW(markov_transition(zero, {cyl, closed}, p), validation_error);
    }
}

TEST(MarkovTransition, FloatMatchesBruteForce) {
    std::mt19937_64 rng(17);
    for (std::int64_t m : {2, 5}) {
        const auto p = new_params(m);
        std::uniform_real_distribution<double> u(0.0, p.theta());
        for (int trial = 0; trial < 200; ++trial) {
            const double x = u(rng);
            double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
            std::vector<double> e = {a, b, c, d};
            std::sort(e.begin(), e.end());
            const std::vector<Interval> A = {{e[0], e[1], true, true}, {e[2], e[3], true, true}};
            long double brute = 0;
            for (std::int64_t i = 2000000; i >= m; --i) {
                const double ui = branch_inverse(i, x, p);
                if ((ui >= e[0] && ui <= e[1]) || (ui >= e[2] && ui <= e[3])) brute += branch_weight(i, x, p);
            }
            EXPECT_NEAR(markov_transition(x, A, p), static_cast<double>(brute), 1e-12);
        }
        EXPECT_THROW(markov_transition(0.1, {{0.3, 0.2, true, true}}, p), validation_error);
    }
}

TEST(GaussKuzmin, CdfIteratesStayCdfs) {
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double th = p.theta();
        const auto F0 = op.sample([th](double x) { return x / th; });
        const auto Fs = gk_iterate_cdf(F0, 6, op);
        ASSERT_EQ(Fs.size(), 7u);
        for (const auto& F : Fs) {
            EXPECT_NEAR(F(0.0), 0.0, 5e-14);
            EXPECT_NEAR(F(th), 1.0, 5e-14);
            double prev = -1;
            for (double x : F.dense_grid()) {
                EXPECT_GE(F(x), prev - 1e-14);
                prev = F(x);
            }
        }
    }
    const TransferOperator op(new_params(2));
    EXPECT_THROW(gk_iterate_cdf(op.sample([](double x) { return x; }), 2, op), validation_error);
}

TEST(GaussKuzmin, InvariantCdfIsFixed) {
    for (std::int64_t m : {2, 3, 10, 17}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const auto G = op.sample([&](double x) { return gamma_cdf(x, p); });
        const auto Fs = gk_iterate_cdf(G, 5, op);
        const auto r = error_sequence(Fs, {}, p, contraction_q(p).value);
        for (double e : r.sup_errors) EXPECT_LE(e, 5e-14) << "m=" << m;
        const auto h = op.sample([&](double x) { return 1.0 / p.log_normalizer() + 0 * x; });
        const auto fs = gk_iterate_density(h, 4, op);
        for (const auto& f : fs) EXPECT_LE(max_abs_diff(f, h), 1e-12);
    }
}

TEST(GaussKuzmin, DensityIterationMatchesCdfDerivative) {
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double th = p.theta();
        const auto Fs = gk_iterate_cdf(op.sample([th](double x) { return x / th; }), 5, op);
        const auto fs = gk_iterate_density(op.sample([th](double x) { return (1 + th * x) / th; }), 5, op);
        for (std::size_t n = 0; n < Fs.size(); ++n) {
            const auto dF = Fs[n].derivative();
            const auto from_cdf = dF.map([th](double x, double v) { return (1 + th * x) * v; });
            EXPECT_LE(max_abs_diff(from_cdf, fs[n]), 1e-10) << "m=" << m << " n=" << n;
        }
    }
}

TEST(GaussKuzmin, UniformStartDecaysGeometrically) {
    const auto p = new_params(10);
    const TransferOperator op(p);
    const double th = p.theta();
    const double q = contraction_q(p).value;
    const auto Fs = gk_iterate_cdf(op.sample([th](double x) { return x / th; }), 12, op);
    const auto fs = gk_iterate_density(op.sample([th](double x) { return (1 + th * x) / th; }), 12, op);
    const auto r = error_sequence(Fs, fs, p, q);
    ASSERT_EQ(r.sup_errors.size(), 13u);
    ASSERT_EQ(r.ratios.size(), 12u);
    EXPECT_LT(r.sup_errors.back(), 1e-12);
    for (std::size_t n = 0; n + 1 < r.sup_errors.size(); ++n) {
        if (r.sup_errors[n] < r.noise_floor) break;
        EXPECT_LT(r.sup_errors[n + 1], r.sup_errors[n]) << "n=" << n;
        if (n >= 2) {
            EXPECT_LE(r.ratios[n], q + 0.02) << "n=" << n;
        }
    }
    for (std::size_t n = 0; n + 1 < r.lipschitz_M.size() && n < 10; ++n) {
        EXPECT_LE(r.lipschitz_M[n + 1], q * r.lipschitz_M[n] + 1e-8) << "n=" << n;
    }
    // R_n vanishes at both ends
    for (std::size_t n = 0; n < Fs.size(); ++n) {
        const auto R = remainder(Fs[n], p);
        EXPECT_NEAR(R.front(), 0.0, 5e-14);
        EXPECT_NEAR(R.back(), 0.0, 5e-14);
    }
}

TEST(PullbackMeasure, InvariantAndUniformCases) {
    for (std::int64_t m : {2, 10}) {
        const auto p = new_params(m);
        const TransferOperator op(p);
        const double th = p.theta();
        const auto inv = op.sample([&](double x) { return invariant_density(x, p); });
        const auto uni = op.sample([](double) { return 1.0; });
        for (double frac : {0.2, 0.5, 0.9}) {
            const double a = 0.1 * th, b = frac * th;
            for (std::size_t n : {0u, 1u, 3u}) {
                EXPECT_NEAR(pullback_measure(a, b, n, inv, op), gamma_cdf(b, p) - gamma_cdf(a, p), 1e-12);
            }
            EXPECT_NEAR(pullback_measure(a, b, 0, uni, op), (b - a) / th, 1e-12);
            // uniform mu, n = 1, A = [0, x]: sum_i [x_i - u_i(x)]/theta with x_i = 1/(i theta)
            const double x = frac * th;
            long double direct = 0;
            for (std::int64_t i = 4000000; i >= m; --i) {
                direct += (1 / (i * th) - 1 / (i * th + x)) / th;
            }
            direct += std::log1p(x / (4000001.0 * th)) / (th * th);  // integral tail of the same sum
            EXPECT_NEAR(pullback_measure(0.0, x, 1, uni, op), static_cast<double>(direct), 1e-10);
        }
    }
}
