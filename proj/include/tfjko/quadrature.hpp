// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_QUADRATURE_HPP
#define TFJKO_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace tfjko
{

// Gauss-Legendre rule on [0, 1].
template <int n>
struct GaussRule
{
    std::array<double, n> x{};
    std::array<double, n> w{};

    GaussRule()
    {
        for (int i = 0; i < n; ++i) {
            double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= n; ++k) {
                    double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = n * (t * p1 - p0) / (t * t - 1.0);
                double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-16)
                    break;
            }
            x[i] = 0.5 * (1.0 - t);
            w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
        }
    }
};

template <int n>
const GaussRule<n>& gauss_rule()
{
    static const GaussRule<n> rule;
    return rule;
}

template <int n, typename F>
double gauss(double a, double b, F&& f)
{
    const auto& g = gauss_rule<n>();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += g.w[i] * f(a + (b - a) * g.x[i]);
    return s * (b - a);
}

// Gauss rule after the substitution x = a + (b-a)(3v^2 - 2v^3), which turns
// square-root endpoint behaviour into a smooth integrand.
template <int n, typename F>
double gauss_graded(double a, double b, F&& f)
{
    const auto& g = gauss_rule<n>();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = g.x[i];
        double x = a + (b - a) * v * v * (3.0 - 2.0 * v);
        s += g.w[i] * 6.0 * v * (1.0 - v) * f(x);
    }
    return s * (b - a);
}

// Exact integral of max(l, 0)^p over an interval of width w on which l is
// linear with end values l0, l1 (assumed nonnegative).
inline double linear_power_integral(double l0, double l1, double w, double p)
{
    l0 = std::max(l0, 0.0);
    l1 = std::max(l1, 0.0);
    double d = l1 - l0;
    double m = 0.5 * (l0 + l1);
    if (std::abs(d) <= 1e-9 * m || m == 0.0) {
        // Taylor in d about the midpoint keeps the short-cell case accurate.
        if (m == 0.0)
            return 0.0;
        double c2 = p * (p - 1.0) / 24.0;
        return w * std::pow(m, p) * (1.0 + c2 * (d / m) * (d / m));
    }
    return w * (std::pow(l1, p + 1.0) - std::pow(l0, p + 1.0)) / ((p + 1.0) * d);
}

} // namespace tfjko

#endif
