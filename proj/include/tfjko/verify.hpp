// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_VERIFY_HPP
#define TFJKO_VERIFY_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "functionals.hpp"
#include "jko.hpp"
#include "ot1d.hpp"

namespace tfjko
{

inline constexpr double tol_wderiv = 1e-4;

struct WderivCase
{
    double analytic = 0.0, finite_difference = 0.0, rel_error = 0.0;
};

struct WderivReport
{
    std::vector<WderivCase> cases;
    double max_rel_error = 0.0;
    bool pass = false;
};

namespace detail
{

inline GridDensity random_mixture(UniformStream& U, std::size_t M)
{
    int k = 1 + static_cast<int>(U.raw() % 3);
    double c[3], w[3], m[3], lo = INFINITY, hi = -INFINITY;
    for (int j = 0; j < k; ++j) {
        c[j] = U(-0.6, 0.6);
        w[j] = U(0.8, 1.6);
        m[j] = U(0.3, 1.0);
        lo = std::min(lo, c[j] - w[j]);
        hi = std::max(hi, c[j] + w[j]);
    }
    return density_from_function(lo, hi, M, [&](double x) {
        double s = 0.0;
        for (int j = 0; j < k; ++j)
            s += m[j] / w[j] * quartic_bump((x - c[j]) / w[j]);
        return s;
    });
}

inline GridDensity add_perturbation(const GridDensity& rho, const SignedGrid& eta, double s)
{
    std::vector<double> xs = merged_nodes(rho.xs(), eta.xs);
    std::vector<double> v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double e = (xs[i] >= eta.xs.front() && xs[i] <= eta.xs.back()) ? eta(xs[i]) : 0.0;
        v[i] = std::max(rho(xs[i]) + s * e, 0.0);
    }
    return GridDensity(std::move(xs), std::move(v));
}

} // namespace detail

// Directional derivative of W2 along zero-mass perturbations against a
// fourth-order central difference of the distance itself.
inline WderivReport verify_wderiv(std::size_t triples = 20, std::uint64_t seed = 20240601)
{
    UniformStream U(seed);
    WderivReport rep;
    while (rep.cases.size() < triples) {
        GridDensity rho = detail::random_mixture(U, 401);
        GridDensity rho_hat = detail::random_mixture(U, 401);
        // odd profile on a grid symmetric about its center has zero integral
        double span = rho.right() - rho.left();
        double c = rho.left() + span * U(0.35, 0.65), w = span * U(0.08, 0.2);
        SignedGrid eta;
        eta.xs = linspace(c - w, c + w, 161);
        double lo = INFINITY;
        for (double x : eta.xs)
            lo = std::min(lo, rho(x));
        if (!(lo > 1e-3))
            continue;
        for (double x : eta.xs) {
            double y = (x - c) / w;
            eta.vals.push_back(0.5 * lo * (-4.0) * y * (1.0 - y * y) * 0.385);
        }
        eta.vals.front() = eta.vals.back() = 0.0;
        WderivCase k;
        k.analytic = w2_perturbation_derivative(rho, rho_hat, eta);
        const double h = 1e-2;
        auto W = [&](double s) { return w2_distance(detail::add_perturbation(rho, eta, s), rho_hat); };
        k.finite_difference = (8.0 * (W(h) - W(-h)) - (W(2.0 * h) - W(-2.0 * h))) / (12.0 * h);
        double scale = std::max(std::abs(k.analytic), 1e-12);
        k.rel_error = std::abs(k.analytic - k.finite_difference) / scale;
        rep.max_rel_error = std::max(rep.max_rel_error, k.rel_error);
        rep.cases.push_back(k);
    }
    rep.pass = rep.max_rel_error < tol_wderiv;
    return rep;
}

struct SplittingLevel
{
    std::size_t nodes = 0;
    double residual = 0.0;
};

struct SplittingReport
{
    std::vector<std::vector<SplittingLevel>> densities; // per test density, per refinement
    double worst_factor = 0.0;                          // max ratio of successive residuals
    bool pass = false;
};

inline constexpr double splitting_factor = 0.6;

// Smooth test densities sqrt(rho) = (a^2 - x^2)(1 + 0.2 sin(1.3 x + 0.4)); one
// inside the equilibrium support, one reaching past it.
inline SplittingReport verify_splitting(const AuxiliaryPotential& W, const ProblemParams& p, std::size_t coarse = 200,
                                        int halvings = 3)
{
    SplittingReport rep;
    const double xs = W.x_star();
    for (double a : {0.85 * xs, 1.25 * xs}) {
        auto sq = [&](double x) {
            double s = (a * a - x * x) * (1.0 + 0.2 * std::sin(1.3 * x + 0.4));
            return s * s;
        };
        double mass = gauss_graded<8>(-a, a, sq);
        std::vector<SplittingLevel> levels;
        std::vector<double> probe; // coarse nodes used at every level
        double rmax = 0.0;
        for (double x : linspace(-a, a, 4001))
            rmax = std::max(rmax, sq(x) / mass);
        for (double x : linspace(-a, a, coarse + 1))
            if (sq(x) / mass >= 0.05 * rmax && std::abs(std::abs(x) - xs) > 0.1 * xs && std::abs(x) < a - 0.1 * a)
                probe.push_back(x);
        for (int lev = 0; lev <= halvings; ++lev) {
            std::size_t n = (coarse << lev) + 1;
            std::vector<double> x = linspace(-a, a, n), r(n);
            for (std::size_t i = 0; i < n; ++i)
                r[i] = sq(x[i]) / mass;
            auto res = splitting_residual(x, r, W, p);
            std::size_t stride = std::size_t{1} << lev;
            double worst = 0.0;
            for (std::size_t i = 0; i < n; i += stride) {
                double xi = x[i];
                for (double q : probe)
                    if (std::abs(q - xi) < 1e-12 * a) {
                        worst = std::max(worst, std::abs(res[i]));
                        break;
                    }
            }
            levels.push_back({n, worst});
            if (lev > 0)
                rep.worst_factor = std::max(rep.worst_factor, worst / levels[lev - 1].residual);
        }
        rep.densities.push_back(levels);
    }
    rep.pass = rep.worst_factor < splitting_factor;
    return rep;
}

struct KappaStability
{
    InequalityReport base, doubled;
    double max_relative_change = 0.0;
    bool stable = false;
};

inline constexpr double kappa_stability = 0.2;

inline KappaStability kappa_stability_check(const AuxiliaryPotential& W, const ProblemParams& p, std::size_t count,
                                            std::uint64_t seed)
{
    KappaStability k;
    k.base = inequality_report(generate_test_densities(W, count, seed), W, p);
    k.doubled = inequality_report(generate_test_densities(W, 2 * count, seed), W, p);
    auto rel = [](double a, double b) { return std::abs(b - a) / std::max(std::abs(a), 1e-300); };
    k.max_relative_change = std::max({rel(k.base.kappa1, k.doubled.kappa1), rel(k.base.kappa2, k.doubled.kappa2),
                                      rel(k.base.kappa3, k.doubled.kappa3)});
    k.stable = k.max_relative_change <= kappa_stability && std::isfinite(k.doubled.kappa);
    return k;
}

} // namespace tfjko

#endif
