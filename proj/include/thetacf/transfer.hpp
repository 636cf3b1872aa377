#pragma once

// Perron-Frobenius operators of T_theta and the Gauss-Kuzmin iteration.
//
//   u_i(x) = 1/(i theta + x),   P_i(x) = (theta x + 1) u_i(x) u_{i+1}(x)
//   U f = sum_{i>=m} P_i f(u_i)            (under gamma_theta)
//   V f = sum_{i>=m} u_i^2 f(u_i)          (under Lebesgue)
//   S f = U g / ((1 + theta x) h),  g = (1 + theta x) f h   (under h dx)
//
// All three reduce to the weighted sum W phi(x) = sum u_i(x)^2 phi(u_i(x)),
// since U f = (1 + theta x) W[f/(1 + theta u)]. Branches i = m..N are summed
// directly. For i > N every u_i(x) lies in [0, delta], delta = 1/((N+1) theta);
// phi is replaced there by its interpolating polynomial sum b_k (u/delta)^k and
// the remaining sums are Hurwitz zeta values.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/polygamma.hpp>

#include "thetacf/chebyshev.hpp"
#include "thetacf/errors.hpp"
#include "thetacf/measure.hpp"
#include "thetacf/params.hpp"
#include "thetacf/qtheta.hpp"

namespace thetacf {

struct OperatorConfig {
    std::size_t degree = 64;
    /// Target accuracy of the truncated branch sum, relative to sup|phi|.
    double series_cutoff_tolerance = 1e-13;
    /// Largest admissible cutoff index N.
    std::int64_t max_branches = 2'000'000;

    void validate() const {
        if (degree < 8) throw validation_error("grid degree must be at least 8 (got " + std::to_string(degree) + ")");
        if (degree > 4096) throw validation_error("grid degree must be at most 4096");
        if (!(series_cutoff_tolerance > 0.0 && series_cutoff_tolerance <= 1e-6)) {
            throw validation_error("series cutoff tolerance must lie in (0, 1e-6]");
        }
    }
};

inline constexpr std::size_t kTailFitDegree = 6;

/// u_i(x) = 1/(i theta + x), the inverse of T_theta on the rank-1 cylinder of digit i.
inline double branch_inverse(std::int64_t i, double x, const ThetaParams& params) {
    if (i < params.m()) throw validation_error("branch index " + std::to_string(i) + " is below m");
    return 1.0 / (static_cast<double>(i) * params.theta() + x);
}

/// P_i(x) = (theta x + 1)/((x + i theta)(x + (i+1) theta)).
inline double branch_weight(std::int64_t i, double x, const ThetaParams& params) {
    if (i < params.m()) throw validation_error("branch index " + std::to_string(i) + " is below m");
    const double th = params.theta();
    const double id = static_cast<double>(i);
    return (th * x + 1) / ((x + id * th) * (x + (id + 1) * th));
}

/// sum_{i>N} P_i(x) = (theta x + 1)/(theta (x + (N+1) theta)).
inline double branch_tail_mass(std::int64_t N, double x, const ThetaParams& params) {
    const double th = params.theta();
    return (th * x + 1) / (th * (x + static_cast<double>(N + 1) * th));
}

namespace detail {

/// zeta(s, a) = sum_{k>=0} (k + a)^-s for integer s >= 2.
inline double hurwitz_zeta(int s, double a) {
    const double pg = boost::math::polygamma(s - 1, a);
    const double fact = std::tgamma(static_cast<double>(s));
    return ((s % 2 == 0) ? 1.0 : -1.0) * pg / fact;
}

/// psi(n + c) - psi(n) for n >= 30, c >= 0, without the cancellation of
/// subtracting two digamma values: the asymptotic series of psi, differenced term by term.
inline double digamma_difference(double n, double c) {
    static constexpr std::array<double, 6> bern = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730};
    const double a = n + c;
    double sum = std::log1p(c / n) + c / (2 * n * a);
    double pn = 1.0, pa = 1.0;
    for (std::size_t k = 1; k <= bern.size(); ++k) {
        pn /= n * n;
        pa /= a * a;
        sum += bern[k - 1] / (2.0 * static_cast<double>(k)) * (pn - pa);
    }
    return sum;
}

/// Monomial coefficients of the shifted Chebyshev polynomials T*_k(s) = T_k(2s - 1).
inline std::array<std::array<double, kTailFitDegree + 1>, kTailFitDegree + 1> shifted_chebyshev_monomials() {
    std::array<std::array<double, kTailFitDegree + 1>, kTailFitDegree + 1> t{};
    t[0][0] = 1.0;
    t[1][0] = -1.0;
    t[1][1] = 2.0;
    for (std::size_t k = 1; k < kTailFitDegree; ++k) {
        for (std::size_t j = 0; j <= kTailFitDegree; ++j) {
            double v = -2.0 * t[k][j] - t[k - 1][j];
            if (j > 0) v += 4.0 * t[k][j - 1];
            t[k + 1][j] = v;
        }
    }
    return t;
}

}  // namespace detail

/// Polynomial sum b_k (u/delta)^k interpolating phi at Chebyshev points of [0, delta].
struct TailFit {
    std::array<double, kTailFitDegree + 1> b{};
};

class TransferOperator {
public:
    TransferOperator(const ThetaParams& params, OperatorConfig config = {}) : params_(params), config_(config) {
        config_.validate();
        const double m = static_cast<double>(params.m());
        // polynomial tail error scales like (m/(N+1))^(kTailFitDegree + 2)
        const double ratio = std::pow(config_.series_cutoff_tolerance, 1.0 / static_cast<double>(kTailFitDegree + 2));
        const double n1 = std::ceil(m / ratio);
        if (n1 > static_cast<double>(config_.max_branches)) {
            throw numerical_error("series cutoff tolerance needs more than " + std::to_string(config_.max_branches) +
                                  " branches");
        }
        cutoff_ = std::max<std::int64_t>(params.m() + 32, static_cast<std::int64_t>(n1) - 1);
        delta_ = 1.0 / (static_cast<double>(cutoff_ + 1) * params.theta());
    }

    const ThetaParams& params() const noexcept { return params_; }
    const OperatorConfig& config() const noexcept { return config_; }
    /// Last branch index summed directly.
    std::int64_t cutoff() const noexcept { return cutoff_; }
    double tail_interval() const noexcept { return delta_; }

    template <class Phi>
    TailFit fit_tail(Phi&& phi) const {
        static const auto monomials = detail::shifted_chebyshev_monomials();
        constexpr std::size_t d = kTailFitDegree;
        std::array<double, d + 1> vals{};
        for (std::size_t j = 0; j <= d; ++j) {
            // Chebyshev points of the first kind on [0, 1]
            const double s = 0.5 * (1.0 - std::cos(std::numbers::pi * (static_cast<double>(j) + 0.5) / (d + 1.0)));
            vals[j] = phi(s * delta_);
        }
        std::array<double, d + 1> cheb{};
        for (std::size_t k = 0; k <= d; ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j <= d; ++j) {
                sum += vals[j] * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / (d + 1.0));
            }
            cheb[k] = sum * 2.0 / (d + 1.0);
        }
        cheb[0] *= 0.5;
        // ordering of the points above is s decreasing in 2s - 1 = -cos(.), hence the sign flip of odd terms
        TailFit fit;
        for (std::size_t k = 0; k <= d; ++k) {
            const double ck = (k % 2 == 0) ? cheb[k] : -cheb[k];
            for (std::size_t j = 0; j <= d; ++j) fit.b[j] += ck * monomials[k][j];
        }
        return fit;
    }

    /// sum_{i>N} u_i(x)^2 phi(u_i(x)) for phi given by its tail fit.
    double weighted_tail(const TailFit& fit, double x) const {
        const double th = params_.theta();
        const double a = static_cast<double>(cutoff_ + 1) + x / th;
        const double n1 = static_cast<double>(cutoff_ + 1);
        double sum = 0.0;
        double scale = 1.0;  // (N+1)^k
        for (std::size_t k = 0; k <= kTailFitDegree; ++k) {
            sum += fit.b[k] * scale * detail::hurwitz_zeta(static_cast<int>(k) + 2, a);
            scale *= n1;
        }
        return sum / (th * th);
    }

    /// W phi(x) = sum_{i>=m} u_i(x)^2 phi(u_i(x)).
    template <class Phi>
    double weighted_sum(Phi&& phi, double x, const TailFit& fit) const {
        const double th = params_.theta();
        long double sum = weighted_tail(fit, x);
        for (std::int64_t i = cutoff_; i >= params_.m(); --i) {
            const double u = 1.0 / (static_cast<double>(i) * th + x);
            sum += static_cast<long double>(u) * u * phi(u);
        }
        return static_cast<double>(sum);
    }

    template <class Phi>
    double weighted_sum(Phi&& phi, double x) const {
        return weighted_sum(phi, x, fit_tail(phi));
    }

    /// U f(x) = sum P_i(x) f(u_i(x)).
    template <class F>
    double U(F&& f, double x) const {
        const double th = params_.theta();
        auto phi = [&](double u) { return f(u) / (1 + th * u); };
        return (1 + th * x) * weighted_sum(phi, x);
    }

    /// V f(x) = sum u_i(x)^2 f(u_i(x)).
    template <class F>
    double V(F&& f, double x) const {
        return weighted_sum(f, x);
    }

    /// One Gauss-Kuzmin step F(x) -> sum_{i>=m} [F(1/(i theta)) - F(1/(i theta + x))].
    template <class F>
    double cdf_step(F&& cdf, double x) const {
        return cdf_step(cdf, x, fit_tail(cdf));
    }

    template <class F>
    double cdf_step(F&& cdf, double x, const TailFit& fit) const {
        const double th = params_.theta();
        const double n1 = static_cast<double>(cutoff_ + 1);
        const double a = n1 + x / th;
        // sum_{i>N} [(u_i(0)/delta)^k - (u_i(x)/delta)^k] = (N+1)^k [zeta(k, N+1) - zeta(k, a)], k >= 2
        double sum = fit.b[1] * n1 * detail::digamma_difference(n1, x / th);
        double scale = n1;
        for (std::size_t k = 2; k <= kTailFitDegree; ++k) {
            scale *= n1;
            const int s = static_cast<int>(k);
            sum += fit.b[k] * scale * (detail::hurwitz_zeta(s, n1) - detail::hurwitz_zeta(s, a));
        }
        long double total = sum;
        for (std::int64_t i = cutoff_; i >= params_.m(); --i) {
            const double id = static_cast<double>(i);
            total += static_cast<long double>(cdf(1.0 / (id * th))) - cdf(1.0 / (id * th + x));
        }
        return static_cast<double>(total);
    }

    GridFunction apply_U(const GridFunction& f) const {
        const double th = params_.theta();
        auto phi = [&](double u) { return f(u) / (1 + th * u); };
        const TailFit fit = fit_tail(phi);
        return sample([&](double x) { return (1 + th * x) * weighted_sum(phi, x, fit); });
    }

    GridFunction apply_V(const GridFunction& f) const {
        auto phi = [&](double u) { return f(u); };
        const TailFit fit = fit_tail(phi);
        return sample([&](double x) { return weighted_sum(phi, x, fit); });
    }

    /// S f = U g/((1 + theta x) h) with g = (1 + theta x) f h; h is a positive density.
    GridFunction apply_S(const GridFunction& f, const GridFunction& h) const {
        check_density(h);
        const double th = params_.theta();
        const GridFunction g = f.map([&](double x, double v) { return (1 + th * x) * v * h(x); });
        const GridFunction ug = apply_U(g);
        return ug.map([&](double x, double v) { return v / ((1 + th * x) * h(x)); });
    }

    GridFunction apply_U_power(GridFunction f, std::size_t n) const {
        for (std::size_t k = 0; k < n; ++k) f = apply_U(f);
        return f;
    }

    GridFunction apply_V_power(GridFunction f, std::size_t n) const {
        for (std::size_t k = 0; k < n; ++k) f = apply_V(f);
        return f;
    }

    GridFunction apply_S_power(GridFunction f, const GridFunction& h, std::size_t n) const {
        for (std::size_t k = 0; k < n; ++k) f = apply_S(f, h);
        return f;
    }

    /// V^n f through U^n: V^n f = U^n[(1 + theta x) f]/(1 + theta x).
    GridFunction V_power_via_U(const GridFunction& f, std::size_t n) const {
        const double th = params_.theta();
        const GridFunction g = f.map([&](double x, double v) { return (1 + th * x) * v; });
        return apply_U_power(g, n).map([&](double x, double v) { return v / (1 + th * x); });
    }

    /// S^n f through U^n: S^n f = U^n g/((1 + theta x) h).
    GridFunction S_power_via_U(const GridFunction& f, const GridFunction& h, std::size_t n) const {
        check_density(h);
        const double th = params_.theta();
        const GridFunction g = f.map([&](double x, double v) { return (1 + th * x) * v * h(x); });
        return apply_U_power(g, n).map([&](double x, double v) { return v / ((1 + th * x) * h(x)); });
    }

    GridFunction cdf_step(const GridFunction& F) const {
        auto cdf = [&](double u) { return F(u); };
        const TailFit fit = fit_tail(cdf);
        return sample([&](double x) { return cdf_step(cdf, x, fit); });
    }

    template <class F>
    GridFunction sample(F&& f) const {
        return GridFunction::sample(f, 0.0, params_.theta(), config_.degree);
    }

private:
    void check_density(const GridFunction& h) const {
        for (double x : h.dense_grid()) {
            if (!(h(x) > 0.0)) throw numerical_error("density vanishes or is negative at x = " + std::to_string(x));
        }
    }

    ThetaParams params_;
    OperatorConfig config_;
    std::int64_t cutoff_ = 0;
    double delta_ = 0.0;
};

/// Invariant density of T_theta with respect to normalized Lebesgue measure dx/theta.
inline double invariant_density(double x, const ThetaParams& params) {
    return params.theta() * params.theta() / (params.log_normalizer() * (1 + params.theta() * x));
}

/// An interval inside [0, theta] with explicit endpoint membership.
struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    bool lower_closed = true;
    bool upper_closed = true;
};

struct ExactInterval {
    QTheta lower;
    QTheta upper;
    bool lower_closed = true;
    bool upper_closed = true;
};

namespace detail {

inline void check_intervals_sorted(const std::vector<std::pair<double, double>>& spans, double theta) {
    for (std::size_t k = 0; k < spans.size(); ++k) {
        if (!(spans[k].first <= spans[k].second)) throw validation_error("interval with lower > upper");
        if (spans[k].first < 0.0 || spans[k].second > theta * (1 + 1e-15)) {
            throw validation_error("interval leaves [0, theta]");
        }
        if (k > 0 && spans[k].first < spans[k - 1].second) throw validation_error("intervals overlap");
    }
}

/// sum_{i=lo}^{hi} P_i(x), by telescoping: P_i = (theta x + 1)(u_i - u_{i+1})/theta. hi < 0 means infinity.
inline double branch_range_mass(std::int64_t lo, std::int64_t hi, double x, const ThetaParams& params) {
    if (hi >= 0 && hi < lo) return 0.0;
    const double th = params.theta();
    const double u_lo = 1.0 / (static_cast<double>(lo) * th + x);
    const double u_hi = hi < 0 ? 0.0 : 1.0 / (static_cast<double>(hi + 1) * th + x);
    return (th * x + 1) * (u_lo - u_hi) / th;
}

}  // namespace detail

/// Q(x, A) = sum of P_i(x) over the branches with u_i(x) in A, for a finite
/// union of disjoint intervals. Membership uses floating comparisons.
inline double markov_transition(double x, const std::vector<Interval>& A, const ThetaParams& params) {
    x = detail::check_unit_interval(x, params);
    std::vector<std::pair<double, double>> spans;
    for (const auto& iv : A) spans.emplace_back(iv.lower, iv.upper);
    std::vector<std::size_t> order(A.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto l, auto r) { return spans[l] < spans[r]; });
    std::vector<std::pair<double, double>> sorted;
    for (auto k : order) sorted.push_back(spans[k]);
    detail::check_intervals_sorted(sorted, params.theta());

    const double th = params.theta();
    double total = 0.0;
    for (const auto& iv : A) {
        // u_i <= upper  <=>  i >= (1/upper - x)/theta ; u_i >= lower  <=>  i <= (1/lower - x)/theta
        if (iv.upper <= 0.0) continue;
        const double c_hi = (1.0 / iv.upper - x) / th;
        std::int64_t i_min = iv.upper_closed ? static_cast<std::int64_t>(std::ceil(c_hi))
                                             : static_cast<std::int64_t>(std::floor(c_hi)) + 1;
        i_min = std::max(i_min, params.m());
        std::int64_t i_max = -1;
        if (iv.lower > 0.0) {
            const double c_lo = (1.0 / iv.lower - x) / th;
            i_max = iv.lower_closed ? static_cast<std::int64_t>(std::floor(c_lo))
                                    : static_cast<std::int64_t>(std::ceil(c_lo)) - 1;
            if (i_max < i_min) continue;
        }
        total += detail::branch_range_mass(i_min, i_max, x, params);
    }
    return total;
}

/// Q(x, A) with x and the interval endpoints exact, so branch membership is decided exactly.
inline double markov_transition(const QTheta& x, const std::vector<ExactInterval>& A, const ThetaParams& params) {
    if (x.m() != params.m()) throw validation_error("x belongs to a different m");
    const QTheta th = QTheta::theta(params.m());
    if (x.sign() < 0 || x > th) throw domain_error("x lies outside [0, theta]");
    std::vector<std::pair<double, double>> spans;
    for (const auto& iv : A) {
        if (iv.upper < iv.lower) throw validation_error("interval with lower > upper");
        if (iv.lower.sign() < 0 || iv.upper > th) throw validation_error("interval leaves [0, theta]");
        spans.emplace_back(iv.lower.to_double(), iv.upper.to_double());
    }
    for (std::size_t k = 0; k < A.size(); ++k) {
        for (std::size_t l = k + 1; l < A.size(); ++l) {
            const bool disjoint = A[k].upper < A[l].lower || A[l].upper < A[k].lower ||
                                  (A[k].upper == A[l].lower && !(A[k].upper_closed && A[l].lower_closed)) ||
                                  (A[l].upper == A[k].lower && !(A[l].upper_closed && A[k].lower_closed));
            if (!disjoint) throw validation_error("intervals overlap");
        }
    }
    const QTheta inv_theta = QTheta(params.m(), 0, BigRational(params.m()));  // 1/theta = m theta
    const double xd = x.to_double();
    double total = 0.0;
    for (const auto& iv : A) {
        if (iv.upper.sign() <= 0) continue;
        const QTheta c_hi = (iv.upper.reciprocal() - x) * inv_theta;
        const BigInt fl_hi = c_hi.floor();
        const bool hi_integral = QTheta(params.m(), BigRational(fl_hi)) == c_hi;
        BigInt i_min = iv.upper_closed ? BigInt(hi_integral ? fl_hi : BigInt(fl_hi + 1)) : BigInt(fl_hi + 1);
        if (i_min < params.m()) i_min = params.m();
        std::int64_t i_max = -1;
        if (iv.lower.sign() > 0) {
            const QTheta c_lo = (iv.lower.reciprocal() - x) * inv_theta;
            const BigInt fl_lo = c_lo.floor();
            const bool lo_integral = QTheta(params.m(), BigRational(fl_lo)) == c_lo;
            const BigInt hi_idx = iv.lower_closed ? fl_lo : BigInt(lo_integral ? BigInt(fl_lo - 1) : fl_lo);
            if (hi_idx < i_min) continue;
            i_max = hi_idx.convert_to<std::int64_t>();
        }
        total += detail::branch_range_mass(i_min.convert_to<std::int64_t>(), i_max, xd, params);
    }
    return total;
}

/// F_0, F_1, ..., F_n under F_{k+1}(x) = sum_{i>=m} [F_k(1/(i theta)) - F_k(1/(i theta + x))].
inline std::vector<GridFunction> gk_iterate_cdf(const GridFunction& F0, std::size_t n, const TransferOperator& op) {
    const double th = op.params().theta();
    if (F0.lower() != 0.0 || F0.upper() != th) throw validation_error("initial CDF must live on [0, theta]");
    if (std::fabs(F0(0.0)) > 1e-12 || std::fabs(F0(th) - 1.0) > 1e-12) {
        throw validation_error("initial CDF must satisfy F(0) = 0 and F(theta) = 1");
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (double x : F0.dense_grid()) {
        const double v = F0(x);
        if (v < prev - 1e-12) throw validation_error("initial CDF must be non-decreasing");
        prev = v;
    }
    std::vector<GridFunction> out{F0};
    out.reserve(n + 1);
    for (std::size_t k = 0; k < n; ++k) out.push_back(op.cdf_step(out.back()));
    return out;
}

/// f_0, f_1 = U f_0, ..., f_n. With f_k = (1 + theta x) F_k' this is the density form of gk_iterate_cdf.
inline std::vector<GridFunction> gk_iterate_density(const GridFunction& f0, std::size_t n, const TransferOperator& op) {
    std::vector<GridFunction> out{f0};
    out.reserve(n + 1);
    for (std::size_t k = 0; k < n; ++k) out.push_back(op.apply_U(out.back()));
    return out;
}

/// Below this sup error the decay sequence measures rounding rather than the operator.
inline constexpr double kDecayNoiseFloor = 1e-12;

struct DecayReport {
    std::vector<double> sup_errors;
    /// ratios[k] = sup_errors[k+1]/sup_errors[k]; NaN once sup_errors[k] is below the noise floor.
    std::vector<double> ratios;
    /// M_n = max |f_n'|.
    std::vector<double> lipschitz_M;
    double q_reference = 0.0;
    double noise_floor = kDecayNoiseFloor;
};

/// max |f'| over the oversampled grid, from the spectral derivative.
inline double lipschitz_seminorm(const GridFunction& f) { return f.derivative().sup_norm(); }

/// Supremum of partition sums over the oversampled grid; a lower bound for var f
/// that is exact for monotone functions and increases under refinement.
inline double variation(const GridFunction& f, std::size_t factor = 16) {
    const auto xs = f.dense_grid(factor);
    double total = 0.0;
    double prev = f(xs.front());
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const double v = f(xs[k]);
        total += std::fabs(v - prev);
        prev = v;
    }
    return total;
}

/// var f = |f(b) - f(a)| for monotone f on [a, b].
template <class F>
double variation_monotone(F&& f, double a, double b) {
    return std::fabs(f(b) - f(a));
}

/// Decay of the CDF iterates towards gk_limit_cdf, and M_n of the matching density iterates.
inline DecayReport error_sequence(const std::vector<GridFunction>& Fs, const std::vector<GridFunction>& fs,
                                  const ThetaParams& params, double q_reference) {
    DecayReport r;
    r.q_reference = q_reference;
    for (const auto& F : Fs) {
        double best = 0.0;
        for (double x : F.dense_grid()) best = std::max(best, std::fabs(F(x) - gk_limit_cdf(x, params)));
        r.sup_errors.push_back(best);
    }
    for (std::size_t k = 0; k + 1 < r.sup_errors.size(); ++k) {
        r.ratios.push_back(r.sup_errors[k] >= r.noise_floor ? r.sup_errors[k + 1] / r.sup_errors[k]
                                                            : std::numeric_limits<double>::quiet_NaN());
    }
    for (const auto& f : fs) r.lipschitz_M.push_back(lipschitz_seminorm(f));
    return r;
}

/// R_n(x) = F_n(x) - gk_limit_cdf(x) on the dense grid.
inline std::vector<double> remainder(const GridFunction& Fn, const ThetaParams& params) {
    std::vector<double> out;
    for (double x : Fn.dense_grid()) out.push_back(Fn(x) - gk_limit_cdf(x, params));
    return out;
}

/// mu(T^{-n} A) for A = [a, b] and mu = h dx/theta, as int_A U^n f dgamma with
/// f = log(1 + theta^2)(1 + theta x) h / theta^2.
inline double pullback_measure(double a, double b, std::size_t n, const GridFunction& h, const TransferOperator& op) {
    const ThetaParams& p = op.params();
    const double th = p.theta();
    a = detail::check_unit_interval(a, p);
    b = detail::check_unit_interval(b, p);
    if (a > b) throw validation_error("interval with lower > upper");
    for (double x : h.dense_grid()) {
        if (!(h(x) >= 0.0) || !std::isfinite(h(x))) throw validation_error("density must be finite and nonnegative");
    }
    const double L = p.log_normalizer();
    GridFunction f = h.map([&](double x, double v) { return L * (1 + th * x) * v / (th * th); });
    f = op.apply_U_power(f, n);
    if (a == b) return 0.0;
    return integrate_gk([&](double x) { return f(x) * gamma_density(x, p); }, a, b, 1e-13).value;
}

}  // namespace thetacf
