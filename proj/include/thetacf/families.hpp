#pragma once

// Built-in test functions on [0, theta] for the operator checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "thetacf/errors.hpp"

namespace thetacf {

/// Non-decreasing piecewise-linear function through the knots (xs, ys).
struct PiecewiseLinear {
    std::vector<double> xs;
    std::vector<double> ys;

    double operator()(double x) const {
        if (x <= xs.front()) return ys.front();
        if (x >= xs.back()) return ys.back();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const auto k = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
        return ys[k - 1] + t * (ys[k] - ys[k - 1]);
    }
};

/// Smooth functions with closed forms: a sin(bx + c), a e^{bx}, a/(1 + |b|x) + cx^2, ax + bx^3 + c.
struct SmoothFunction {
    int kind = 0;
    double a = 0.0, b = 0.0, c = 0.0;

    double operator()(double x) const {
        switch (kind) {
            case 0: return a * std::sin(b * x + c);
            case 1: return a * std::exp(b * x);
            case 2: return a / (1 + std::fabs(b) * x) + c * x * x;
            default: return a * x + b * x * x * x + c;
        }
    }

    std::string label() const {
        static const char* names[] = {"sin", "exp", "rational", "cubic"};
        return names[kind & 3];
    }
};

/// `count` random monotone functions. Knots stay out of [0, 0.05 theta] so that
/// the kinks never land among the far branches, where the tail fit assumes smoothness.
inline std::vector<PiecewiseLinear> monotone_family(std::size_t count, double theta, std::uint64_t seed) {
    if (count == 0) throw validation_error("family size must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.05 * theta, theta);
    std::uniform_real_distribution<double> step(0.0, 1.0);
    std::uniform_int_distribution<int> knots(1, 6);
    std::vector<PiecewiseLinear> out;
    for (std::size_t i = 0; i < count; ++i) {
        PiecewiseLinear f;
        const int k = knots(rng);
        f.xs.push_back(0.0);
        for (int j = 0; j < k; ++j) f.xs.push_back(pos(rng));
        f.xs.push_back(theta);
        std::sort(f.xs.begin(), f.xs.end());
        f.xs.erase(std::unique(f.xs.begin(), f.xs.end()), f.xs.end());
        double y = step(rng) - 0.5;
        for (std::size_t j = 0; j < f.xs.size(); ++j) {
            f.ys.push_back(y);
            y += step(rng);
        }
        out.push_back(std::move(f));
    }
    return out;
}

inline std::vector<SmoothFunction> smooth_family(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw validation_error("family size must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<SmoothFunction> out;
    for (std::size_t i = 0; i < count; ++i) {
        SmoothFunction f;
        f.kind = static_cast<int>(i % 4);
        f.a = u(rng);
        f.b = u(rng);
        f.c = u(rng);
        out.push_back(f);
    }
    return out;
}

}  // namespace thetacf
