// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_OT1D_HPP
#define TFJKO_OT1D_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "density.hpp"
#include "quadrature.hpp"

namespace tfjko
{

inline constexpr double tol_ot = 1e-6;

inline double w2_distance(const QuantilePoints& a, const QuantilePoints& b)
{
    if (a.size() != b.size())
        throw InputError("w2_distance: particle counts differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// Quantile-space panels: 64 uniform panels refined at every node image of
// both CDFs, each integrated by a graded 4-point Gauss rule.
inline double w2_distance(const GridDensity& a, const GridDensity& b)
{
    for (const GridDensity* r : {&a, &b})
        if (std::abs(r->mass() - 1.0) > tol_mass)
            throw InputError("w2_distance: mass deficit exceeds tolerance");
    QuantileFunction Xa(a), Xb(b);
    std::vector<double> cuts = linspace(0.0, 1.0, 65);
    for (const auto* F : {&Xa.breakpoints(), &Xb.breakpoints()})
        for (double f : *F)
            cuts.push_back(std::clamp(f, 0.0, 1.0));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        s += gauss_graded<4>(cuts[k], cuts[k + 1], [&](double xi) {
            double d = Xa(xi) - Xb(xi);
            return d * d;
        });
    }
    return s;
}

struct TransportPlan1D
{
    std::vector<double> xs; // source nodes with positive density
    std::vector<double> T;  // X_target(F_source(x)) at those nodes
    double pushforward_error = 0.0;
};

inline TransportPlan1D optimal_map(const GridDensity& source, const GridDensity& target)
{
    if (has_interior_plateau(target))
        warn("target has interior vacuum: leftmost quantile used");
    QuantileFunction Fs(source), Xt(target);
    TransportPlan1D plan;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source.vals()[i] <= 0.0)
            continue;
        double x = source.xs()[i];
        double xi = Fs.cdf(x);
        double y = Xt(xi);
        plan.xs.push_back(x);
        plan.T.push_back(y);
        plan.pushforward_error = std::max(plan.pushforward_error, std::abs(Xt.cdf(y) - xi));
    }
    return plan;
}

// Signed perturbation sampled on its own nodes.
using SignedGrid = PiecewiseLinear;

struct Support
{
    double a = 0.0, b = 0.0;
};

inline Support support_of(const SignedGrid& eta)
{
    std::size_t first = eta.vals.size(), last = 0;
    for (std::size_t i = 0; i < eta.vals.size(); ++i)
        if (eta.vals[i] != 0.0) {
            first = std::min(first, i);
            last = i;
        }
    if (first == eta.vals.size())
        return {eta.xs.front(), eta.xs.front()};
    Support s;
    s.a = eta.xs[first > 0 ? first - 1 : 0];
    s.b = eta.xs[last + 1 < eta.xs.size() ? last + 1 : last];
    return s;
}

// Antiderivative of eta from the left edge of its support.
inline double eta_primitive(const SignedGrid& eta, double x)
{
    const auto& xs = eta.xs;
    const auto& v = eta.vals;
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        if (xs[j] >= x)
            break;
        double b = std::min(xs[j + 1], x);
        double h = xs[j + 1] - xs[j];
        double t = b - xs[j];
        s += v[j] * t + 0.5 * (v[j + 1] - v[j]) / h * t * t;
    }
    return s;
}

inline void check_perturbation(const GridDensity& rho, const SignedGrid& eta)
{
    check_nodes(eta.xs, eta.vals, 2);
    if (std::abs(eta.integral()) > 1e-10)
        throw InputError("perturbation must have zero integral");
    Support s = support_of(eta);
    double lo = INFINITY;
    lo = std::min({lo, rho(s.a), rho(s.b)});
    for (double x : rho.xs())
        if (x > s.a && x < s.b)
            lo = std::min(lo, rho(x));
    if (!(lo > 0.0) || s.a <= rho.left() || s.b >= rho.right())
        throw InputError("perturbation support touches vacuum");
}

// d/ds W2(rho + s eta, rho_hat) at s = 0, i.e. 2 int eta phi with
// phi' = y - T(y), evaluated as -2 int E (y - T(y)) dy with E = int eta.
inline double w2_perturbation_derivative(const GridDensity& rho, const GridDensity& rho_hat, const SignedGrid& eta)
{
    check_perturbation(rho, eta);
    Support s = support_of(eta);
    QuantileFunction Fr(rho), Xh(rho_hat);
    std::vector<double> cuts{s.a, s.b};
    for (double x : rho.xs())
        if (x > s.a && x < s.b)
            cuts.push_back(x);
    for (double x : eta.xs)
        if (x > s.a && x < s.b)
            cuts.push_back(x);
    const double fa = Fr.cdf(s.a), fb = Fr.cdf(s.b);
    for (double f : Xh.breakpoints())
        if (f > fa && f < fb)
            cuts.push_back(Fr(f));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        acc += gauss_graded<8>(cuts[k], cuts[k + 1], [&](double y) {
            return eta_primitive(eta, y) * (y - Xh(Fr.cdf(y)));
        });
    }
    return -2.0 * acc;
}

// Velocity of the quantile function along rho + s eta:
// dX/ds(xi) = -(1/rho(X)) int_{a0}^{X} eta.
inline double quantile_velocity(const GridDensity& rho, const SignedGrid& eta, double xi)
{
    QuantileFunction X(rho);
    double x = X(xi);
    double r = rho(x);
    if (!(r > 0.0))
        throw InputError("quantile_velocity: vacuum at the requested level");
    return -eta_primitive(eta, x) / r;
}

} // namespace tfjko

#endif
