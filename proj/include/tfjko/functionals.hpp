// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_FUNCTIONALS_HPP
#define TFJKO_FUNCTIONALS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "density.hpp"
#include "params.hpp"
#include "quadrature.hpp"
#include "stationary.hpp"

namespace tfjko
{

namespace detail
{

// Visits the pieces of f between consecutive breakpoints (f's nodes merged with
// `cuts`), passing the endpoint values of f taken inside the piece.
template <typename Fn>
void for_each_piece(const PiecewiseLinear& f, const std::vector<double>& cuts, Fn&& fn)
{
    const auto& xs = f.xs;
    const auto& v = f.vals;
    auto c = std::lower_bound(cuts.begin(), cuts.end(), xs.front());
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        const double a = xs[j], b = xs[j + 1], h = b - a;
        const double k = (v[j + 1] - v[j]) / h;
        double lo = a;
        while (c != cuts.end() && *c <= a)
            ++c;
        while (c != cuts.end() && *c < b) {
            fn(lo, *c, v[j] + k * (lo - a), v[j] + k * (*c - a), k);
            lo = *c;
            ++c;
        }
        fn(lo, b, v[j] + k * (lo - a), v[j + 1], k);
    }
}

inline std::vector<double> potential_cuts(const AuxiliaryPotential& W) { return W.nodes(); }

inline double lerp(double a, double b, double ra, double rb, double x)
{
    return ra + (rb - ra) * (x - a) / (b - a);
}

} // namespace detail

inline double energy_E(const GridDensity& rho, const ProblemParams& p)
{
    p.validate();
    PiecewiseLinear f = closed(rho);
    double dir = 0.0;
    for (std::size_t j = 0; j + 1 < f.xs.size(); ++j) {
        double k = (f.vals[j + 1] - f.vals[j]) / (f.xs[j + 1] - f.xs[j]);
        dir += k * k * (f.xs[j + 1] - f.xs[j]);
    }
    double hterm = 0.0;
    if (p.eps > 0.0) {
        const auto& x = rho.xs();
        const auto& v = rho.vals();
        for (std::size_t j = 0; j + 1 < x.size(); ++j)
            hterm += gauss_graded<8>(x[j], x[j + 1], [&](double y) {
                return p.nl.eval(detail::lerp(x[j], x[j + 1], v[j], v[j + 1], y));
            });
    }
    return 0.5 * dir + 0.5 * p.lambda * second_moment(rho) + p.eps * hterm;
}

// int (2/3) rho^{3/2} + W rho; exact for piecewise-linear rho.
inline double lyapunov_L(const GridDensity& rho, const AuxiliaryPotential& W)
{
    const auto& x = rho.xs();
    const auto& v = rho.vals();
    double f = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j)
        f += linear_power_integral(v[j], v[j + 1], x[j + 1] - x[j], 1.5);
    double w = 0.0;
    const auto cuts = detail::potential_cuts(W);
    detail::for_each_piece(rho.function(), cuts, [&](double a, double b, double ra, double rb, double) {
        w += gauss<4>(a, b, [&](double y) { return W(y) * detail::lerp(a, b, ra, rb, y); });
    });
    return 2.0 / 3.0 * f + w;
}

// L at the equilibrium rho_bar = W^2: -(1/3) int |W|^3 over the support.
inline double lyapunov_equilibrium(const AuxiliaryPotential& W)
{
    const auto& st = W.profile();
    double s3 = 0.0;
    for (std::size_t i = 0; i + 1 < st.half_x.size(); ++i)
        s3 += gauss<8>(st.half_x[i], st.half_x[i + 1], [&](double y) {
            double s = st.sqrt_profile(y)[0];
            return s * s * s;
        });
    return -2.0 / 3.0 * s3;
}

// int d_f(rho | rho_bar) + int rho (W)_+, evaluated independently of lyapunov_L.
inline double bregman_representation(const GridDensity& rho, const AuxiliaryPotential& W)
{
    const double xs = W.x_star();
    PiecewiseLinear f = rho.function();
    // extend by zero so the pieces cover the equilibrium support too
    if (f.xs.front() > -xs) {
        f.xs.insert(f.xs.begin(), -xs);
        f.vals.insert(f.vals.begin(), 0.0);
    }
    if (f.xs.back() < xs) {
        f.xs.push_back(xs);
        f.vals.push_back(0.0);
    }
    std::vector<double> cuts = W.nodes();
    cuts.push_back(rho.left());
    cuts.push_back(rho.right());
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    detail::for_each_piece(f, cuts, [&](double a, double b, double ra, double rb, double) {
        if (b <= a)
            return;
        const double mid = 0.5 * (a + b);
        const bool in_rho = mid > rho.left() && mid < rho.right();
        if (!in_rho) {
            ra = rb = 0.0;
        }
        total += 2.0 / 3.0 * linear_power_integral(ra, rb, b - a, 1.5);
        if (std::abs(mid) < xs) {
            total += gauss<8>(a, b, [&](double y) {
                double s = -W(y);
                return s * s * s / 3.0 - s * detail::lerp(a, b, ra, rb, y);
            });
        } else {
            total += gauss<8>(a, b, [&](double y) { return std::max(W(y), 0.0) * detail::lerp(a, b, ra, rb, y); });
        }
    });
    return total;
}

// int rho ((sqrt rho)_x + W_x)^2 on the continued density; exact slopes per cell.
inline double entropy_production(const GridDensity& rho, const AuxiliaryPotential& W)
{
    PiecewiseLinear f = closed(rho);
    double total = 0.0;
    detail::for_each_piece(f, detail::potential_cuts(W), [&](double a, double b, double ra, double rb, double k) {
        if (b <= a)
            return;
        total += 0.25 * k * k * (b - a);
        total += gauss_graded<8>(a, b, [&](double y) {
            double r = std::max(detail::lerp(a, b, ra, rb, y), 0.0);
            double wx = W.eval(y)[1];
            return k * std::sqrt(r) * wx + r * wx * wx;
        });
    });
    return std::max(total, 0.0);
}

struct RemainderField
{
    std::vector<double> xs;
    std::vector<double> v_eps;
    std::vector<double> r_eps;
    double a_eps = 0.0;
};

namespace detail
{

// eps * v_eps in closed form: zero inside, sign(x)(lambda - 6 c2^2)(|x| - x*) outside.
inline double eps_v(const AuxiliaryPotential& W, double lambda, double x)
{
    double d = std::abs(x) - W.x_star();
    if (d <= 0.0)
        return 0.0;
    double slope = lambda - 6.0 * W.c2() * W.c2();
    return (x < 0.0 ? -1.0 : 1.0) * slope * d;
}

inline double rho_bar_dx(const AuxiliaryPotential& W, double x)
{
    if (std::abs(x) >= W.x_star())
        return 0.0;
    auto w = W.eval(x);
    return 2.0 * w[0] * w[1];
}

// (h'(rho) - h'(rho_bar))_x given rho and its slope at x.
inline double hprime_gap_dx(const ProblemParams& p, const AuxiliaryPotential& W, double x, double r, double rx)
{
    double rb = W.rho_bar(x);
    return p.nl.d2(std::max(r, 0.0)) * rx - p.nl.d2(rb) * rho_bar_dx(W, x);
}

} // namespace detail

inline RemainderField remainder_fields(const GridDensity& rho, const AuxiliaryPotential& W, const ProblemParams& p)
{
    p.validate();
    if (!(p.eps > 0.0))
        throw InputError("remainder undefined for eps = 0");
    const auto& x = rho.xs();
    const auto& v = rho.vals();
    const std::size_t n = x.size();
    RemainderField out;
    out.xs = x;
    out.a_eps = std::abs(p.lambda - 6.0 * W.c2() * W.c2()) / p.eps;
    out.v_eps.resize(n);
    out.r_eps.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rx;
        if (i == 0)
            rx = (v[1] - v[0]) / (x[1] - x[0]);
        else if (i + 1 == n)
            rx = (v[n - 1] - v[n - 2]) / (x[n - 1] - x[n - 2]);
        else
            rx = (v[i + 1] - v[i - 1]) / (x[i + 1] - x[i - 1]);
        auto w = W.eval(x[i]);
        double ve = detail::eps_v(W, p.lambda, x[i]) / p.eps;
        out.v_eps[i] = ve;
        double dh = detail::hprime_gap_dx(p, W, x[i], v[i], rx);
        out.r_eps[i] = 2.0 * (w[3] / p.eps) * (std::sqrt(v[i]) + w[0]) + ve + dh;
    }
    return out;
}

// Pointwise residual of the splitting identity on a uniform grid, by centered
// differences; entries within three nodes of either end are left at zero.
inline std::vector<double> splitting_residual(const std::vector<double>& xs, const std::vector<double>& rho,
                                              const AuxiliaryPotential& W, const ProblemParams& p)
{
    const std::size_t n = xs.size();
    if (n < 9 || rho.size() != n)
        throw InputError("splitting_residual needs matching arrays of at least 9 nodes");
    const double h = xs[1] - xs[0];
    auto d1 = [&](const std::vector<double>& f, std::size_t i) { return (f[i + 1] - f[i - 1]) / (2.0 * h); };
    auto d2 = [&](const std::vector<double>& f, std::size_t i) { return (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h); };
    std::vector<double> g(n, 0.0), a(n), A(n, 0.0), hg(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = std::sqrt(rho[i]) + W(xs[i]);
        hg[i] = p.nl.d1(rho[i]) - p.nl.d1(W.rho_bar(xs[i]));
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double hp = p.eps > 0.0 ? p.eps * p.nl.d1(rho[i]) : 0.0;
        g[i] = -d2(rho, i) + 0.5 * p.lambda * xs[i] * xs[i] + hp;
        A[i] = rho[i] * std::sqrt(rho[i]) * d2(a, i);
    }
    std::vector<double> res(n, 0.0);
    for (std::size_t i = 3; i + 3 < n; ++i) {
        auto w = W.eval(xs[i]);
        double lhs = rho[i] * d1(g, i);
        double eps_r = 2.0 * w[3] * a[i] + detail::eps_v(W, p.lambda, xs[i]) + p.eps * d1(hg, i);
        double rhs = -2.0 * d1(A, i) + 6.0 * rho[i] * w[2] * d1(a, i) + rho[i] * eps_r;
        res[i] = lhs - rhs;
    }
    return res;
}

struct DensityTerms
{
    double production = 0.0;
    double gap = 0.0;       // L(rho) - L(rho_bar)
    double v2 = 0.0;        // int rho v^2
    double w3 = 0.0;        // int rho (|W'''|/eps)(sqrt rho + W)^2
    double w3sq = 0.0;      // int rho (2 W'''/eps)^2 (sqrt rho + W)^2
    double hgap = 0.0;      // int rho ((h'(rho) - h'(rho_bar))_x)^2
    double remainder = 0.0; // int rho R^2
};

inline DensityTerms density_terms(const GridDensity& rho, const AuxiliaryPotential& W, const ProblemParams& p,
                                  double L_bar)
{
    DensityTerms t;
    t.production = entropy_production(rho, W);
    t.gap = lyapunov_L(rho, W) - L_bar;
    if (!(p.eps > 0.0))
        return t;
    std::vector<double> cuts = W.nodes();
    detail::for_each_piece(closed(rho), cuts, [&](double a, double b, double ra, double rb, double k) {
        if (b <= a)
            return;
        double q[5] = {0, 0, 0, 0, 0};
        const auto& g = gauss_rule<8>();
        for (int m = 0; m < 8; ++m) {
            double vv = g.x[m];
            double y = a + (b - a) * vv * vv * (3.0 - 2.0 * vv);
            double wt = g.w[m] * 6.0 * vv * (1.0 - vv) * (b - a);
            double r = std::max(detail::lerp(a, b, ra, rb, y), 0.0);
            auto w = W.eval(y);
            double ve = detail::eps_v(W, p.lambda, y) / p.eps;
            double c = std::sqrt(r) + w[0];
            double dh = detail::hprime_gap_dx(p, W, y, r, k);
            double R = 2.0 * (w[3] / p.eps) * c + ve + dh;
            q[0] += wt * r * ve * ve;
            q[1] += wt * r * std::abs(w[3]) / p.eps * c * c;
            q[2] += wt * r * 4.0 * (w[3] / p.eps) * (w[3] / p.eps) * c * c;
            q[3] += wt * r * dh * dh;
            q[4] += wt * r * R * R;
        }
        t.v2 += q[0];
        t.w3 += q[1];
        t.w3sq += q[2];
        t.hgap += q[3];
        t.remainder += q[4];
    });
    return t;
}

inline constexpr double ratio_floor = 1e-12;

struct InequalityRow
{
    std::size_t case_id = 0;
    std::string kind;
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

struct InequalityReport
{
    std::vector<InequalityRow> rows;
    double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
    double kappa2_squared = 0.0; // sup of int rho (2W'''/eps)^2 (...)^2 / production
    double kappa = 0.0;          // 3 (kappa1 + kappa2 + kappa3)
    double remainder_ratio = 0.0;
    double dissipation_ratio_min = INFINITY;
    std::size_t dissipation_violations = 0;
    std::size_t excluded = 0;
    std::size_t degenerate = 0;
    bool remainder_bound_ok = true;
};

inline constexpr double tol_dissipation = 1e-6;

inline InequalityReport inequality_report(const std::vector<GridDensity>& rhos, const AuxiliaryPotential& W,
                                          const ProblemParams& p)
{
    p.validate();
    if (rhos.empty())
        throw InputError("inequality_report needs densities");
    const double L_bar = lyapunov_equilibrium(W);
    const double lt = W.lambda_tilde();
    InequalityReport rep;
    std::vector<DensityTerms> terms;
    terms.reserve(rhos.size());
    for (const auto& r : rhos)
        terms.push_back(density_terms(r, W, p, L_bar));

    for (std::size_t i = 0; i < rhos.size(); ++i) {
        const auto& t = terms[i];
        double rhs = 2.0 * lt * t.gap;
        double scale = std::max({t.production, std::abs(rhs), ratio_floor});
        InequalityRow d{i, "dissipation", t.production, rhs, rhs > ratio_floor ? t.production / rhs : INFINITY};
        rep.rows.push_back(d);
        if (t.production < rhs - tol_dissipation * scale)
            ++rep.dissipation_violations;
        if (rhs > ratio_floor)
            rep.dissipation_ratio_min = std::min(rep.dissipation_ratio_min, d.ratio);
        if (!(p.eps > 0.0))
            continue;
        const std::pair<const char*, double> parts[] = {
            {"kappa1", t.v2}, {"kappa2", t.w3}, {"kappa3", t.hgap}, {"kappa2_squared", t.w3sq}};
        bool excluded = t.production < ratio_floor;
        if (excluded) {
            ++rep.excluded;
            for (auto& part : parts)
                if (part.second > ratio_floor) {
                    ++rep.degenerate;
                    warn("degenerate test density " + std::to_string(i) + ": production vanishes, " + part.first +
                         " does not");
                    break;
                }
        }
        for (auto& part : parts) {
            double ratio = excluded ? 0.0 : part.second / t.production;
            rep.rows.push_back({i, part.first, part.second, t.production, ratio});
            if (excluded)
                continue;
            std::string k = part.first;
            if (k == "kappa1")
                rep.kappa1 = std::max(rep.kappa1, ratio);
            else if (k == "kappa2")
                rep.kappa2 = std::max(rep.kappa2, ratio);
            else if (k == "kappa3")
                rep.kappa3 = std::max(rep.kappa3, ratio);
            else
                rep.kappa2_squared = std::max(rep.kappa2_squared, ratio);
        }
        if (!excluded)
            rep.remainder_ratio = std::max(rep.remainder_ratio, t.remainder / t.production);
    }
    rep.kappa = 3.0 * (rep.kappa1 + rep.kappa2 + rep.kappa3);
    if (p.eps > 0.0) {
        // (a + b + c)^2 <= 3 (a^2 + b^2 + c^2) with the squared third-derivative term
        const double bound = 3.0 * (rep.kappa1 + rep.kappa2_squared + rep.kappa3);
        for (std::size_t i = 0; i < rhos.size(); ++i) {
            const auto& t = terms[i];
            if (t.production < ratio_floor)
                continue;
            double rhs = bound * t.production;
            rep.rows.push_back({i, "remainder", t.remainder, rhs, rhs > 0.0 ? t.remainder / rhs : 0.0});
            if (t.remainder > rhs * (1.0 + 1e-9) + ratio_floor)
                rep.remainder_bound_ok = false;
        }
    }
    return rep;
}

// Deterministic uniform draw in [a, b).
class UniformStream
{
public:
    explicit UniformStream(std::uint64_t seed)
        : eng_(seed)
    {
    }
    double operator()(double a, double b) { return a + (b - a) * static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

inline double quartic_bump(double y) { return y > -1.0 && y < 1.0 ? (1.0 - y * y) * (1.0 - y * y) : 0.0; }

// Test densities: perturbations of the equilibrium (translation, dilation,
// bump multiplier) interleaved with mixtures of one to three quartic bumps.
inline std::vector<GridDensity> generate_test_densities(const AuxiliaryPotential& W, std::size_t count,
                                                        std::uint64_t seed, std::size_t M = 400)
{
    UniformStream U(seed);
    const double xs = W.x_star();
    std::vector<GridDensity> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        switch (i % 5) {
        case 0: {
            double a = U(-0.8, 0.8) * xs;
            out.push_back(density_from_function(a - xs, a + xs, M, [&](double x) { return W.rho_bar(x - a); }));
            break;
        }
        case 1: {
            double b = U(0.6, 1.6), a = U(-0.2, 0.2);
            out.push_back(density_from_function(a - b * xs, a + b * xs, M,
                                                [&](double x) { return W.rho_bar((x - a) / b); }));
            break;
        }
        case 2: {
            double d = U(-0.5, 0.9), c = U(-1.0, 1.0) * xs, w = U(0.2, 1.0) * xs;
            out.push_back(density_from_function(-xs, xs, M, [&](double x) {
                return W.rho_bar(x) * (1.0 + d * quartic_bump((x - c) / w));
            }));
            break;
        }
        default: {
            int k = 1 + static_cast<int>(U.raw() % 3);
            double c[3], w[3], m[3];
            double lo = INFINITY, hi = -INFINITY;
            for (int j = 0; j < k; ++j) {
                c[j] = U(-2.0, 2.0);
                w[j] = U(0.4, 2.0);
                m[j] = U(0.2, 1.0);
                lo = std::min(lo, c[j] - w[j]);
                hi = std::max(hi, c[j] + w[j]);
            }
            out.push_back(density_from_function(lo, hi, M, [&](double x) {
                double s = 0.0;
                for (int j = 0; j < k; ++j)
                    s += m[j] / w[j] * quartic_bump((x - c[j]) / w[j]);
                return s;
            }));
            break;
        }
        }
    }
    return out;
}

} // namespace tfjko

#endif
