#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "thetacf/errors.hpp"

namespace thetacf {

/// The integer m together with theta = 1/sqrt(m).
///
/// m must be at least 2 and not a perfect square, so theta is an irrational
/// number in (0, 1). The exact symbolic theta lives in QTheta (qtheta.hpp);
/// this struct carries the floating approximations used by the numerical code.
class ThetaParams {
public:
    static ThetaParams create(std::int64_t m) {
        if (m < 2) {
            throw validation_error("m must be at least 2 (got " + std::to_string(m) + ")");
        }
        if (m > (std::int64_t{1} << 31)) {
            throw validation_error("m is too large (got " + std::to_string(m) + ")");
        }
        if (is_perfect_square(m)) {
            throw validation_error("m must not be a perfect square (got " + std::to_string(m) + ")");
        }
        return ThetaParams(m);
    }

    std::int64_t m() const noexcept { return m_; }
    double theta() const noexcept { return theta_; }
    long double theta_ld() const noexcept { return theta_ld_; }
    /// log(1 + theta^2), the normalizer of the invariant measure.
    double log_normalizer() const noexcept { return log_norm_; }

    friend bool operator==(const ThetaParams& a, const ThetaParams& b) noexcept { return a.m_ == b.m_; }

    static bool is_perfect_square(std::int64_t n) noexcept {
        if (n < 0) return false;
        auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
        while (r * r > n) --r;
        while ((r + 1) * (r + 1) <= n) ++r;
        return r * r == n;
    }

private:
    explicit ThetaParams(std::int64_t m)
        : m_(m),
          theta_(1.0 / std::sqrt(static_cast<double>(m))),
          theta_ld_(1.0L / std::sqrt(static_cast<long double>(m))),
          log_norm_(std::log1p(1.0 / static_cast<double>(m))) {}

    std::int64_t m_;
    double theta_;
    long double theta_ld_;
    double log_norm_;
};

inline ThetaParams new_params(std::int64_t m) { return ThetaParams::create(m); }

}  // namespace thetacf
