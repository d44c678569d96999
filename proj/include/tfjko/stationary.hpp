// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_STATIONARY_HPP
#define TFJKO_STATIONARY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "density.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace tfjko
{

inline constexpr double tol_el = 1e-9;
inline constexpr double convexity_gate = 0.05;

// Value and first three derivatives of the quintic Hermite interpolant on a
// cell of width h, at local coordinate t in [0, 1].
inline std::array<double, 3> quintic_hermite(double h, double f0, double d0, double s0, double f1, double d1,
                                             double s1, double t)
{
    double df = f1 - f0, h2 = h * h;
    double c0 = f0, c1 = h * d0, c2 = 0.5 * h2 * s0;
    double c3 = 10.0 * df - 6.0 * h * d0 - 4.0 * h * d1 - 1.5 * h2 * s0 + 0.5 * h2 * s1;
    double c4 = -15.0 * df + 8.0 * h * d0 + 7.0 * h * d1 + 1.5 * h2 * s0 - h2 * s1;
    double c5 = 6.0 * df - 3.0 * h * (d0 + d1) - 0.5 * h2 * s0 + 0.5 * h2 * s1;
    double v = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
    double v1 = c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)));
    double v2 = 2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5));
    return {v, v1 / h, v2 / h2};
}

struct StationaryDiagnostics
{
    int newton_iterations = 0;
    double shooting_residual = 0.0;  // norm of (rho(x*), rho'(x*), mass - 1)
    double el_residual = 0.0;        // 5-point stencil, interior nodes
    double c_identity_residual = 0.0;
    double bc_residual = 0.0;
    double symmetry_error = 0.0;
    double mass_error = 0.0;
    double c1_fd = 0.0;              // one-sided differences on a 4x finer local grid
    double c2_fd = 0.0;
    double c2_interior = 0.0;        // -(sqrt rho)'' extrapolated from interior nodes
};

struct StationaryProfile
{
    ProblemParams params;
    double x_star = 0.0;
    double C_eps = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double lambda_tilde = 0.0;
    double rho0 = 0.0;
    std::size_t M = 0;
    GridDensity profile;
    std::vector<double> eta; // on profile nodes; zero when eps = 0

    // Nodes in [0, x*] (0 first, x* last) carrying sqrt(rho) and derivatives.
    std::vector<double> half_x;
    std::vector<double> half_rho;
    std::vector<double> s, ds, d2s, d3s;

    StationaryDiagnostics diag;

    double grid_spacing() const { return 2.0 * x_star / static_cast<double>(M - 1); }

    // sqrt(rho_bar) and its first three derivatives at |x| <= x*, x >= 0.
    std::array<double, 4> sqrt_profile(double x) const
    {
        x = std::clamp(x, 0.0, x_star);
        auto it = std::upper_bound(half_x.begin(), half_x.end(), x);
        std::size_t j = (it == half_x.begin()) ? 0 : static_cast<std::size_t>(it - half_x.begin()) - 1;
        j = std::min(j, half_x.size() - 2);
        double h = half_x[j + 1] - half_x[j];
        double t = (x - half_x[j]) / h;
        auto v = quintic_hermite(h, s[j], ds[j], d2s[j], s[j + 1], ds[j + 1], d2s[j + 1], t);
        double third = d3s[j] + t * (d3s[j + 1] - d3s[j]);
        return {v[0], v[1], v[2], third};
    }
};

namespace detail
{

struct HalfGrid
{
    std::vector<double> full_x;         // symmetric grid on [-x*, x*]
    std::vector<double> half_x;         // 0 and the nonnegative nodes
    std::vector<std::size_t> half_step; // substep index of each half node
    std::size_t substeps = 0;
    double hs = 0.0;
};

// Substeps of width h/8 put every nonnegative node (and 0) on the substep lattice.
inline HalfGrid make_half_grid(double x_star, std::size_t M)
{
    HalfGrid g;
    g.substeps = 4 * (M - 1);
    g.hs = x_star / static_cast<double>(g.substeps);
    double hg = 2.0 * x_star / static_cast<double>(M - 1);
    g.full_x.resize(M);
    for (std::size_t j = 0; j < M; ++j)
        g.full_x[j] = -x_star + static_cast<double>(j) * hg;
    for (std::size_t j = 0; j < M / 2; ++j)
        g.full_x[M - 1 - j] = -g.full_x[j];
    if (M % 2 == 1)
        g.full_x[M / 2] = 0.0;
    g.full_x.front() = -x_star;
    g.full_x.back() = x_star;
    g.half_x.push_back(0.0);
    g.half_step.push_back(0);
    for (std::size_t j = (M + 1) / 2; j < M; ++j) {
        g.half_x.push_back(g.full_x[j]);
        g.half_step.push_back(static_cast<std::size_t>(std::llround(g.full_x[j] / g.hs)));
    }
    if (M % 2 == 1) {
        // 0 is already a node; drop the duplicate
        g.half_x.erase(g.half_x.begin() + 1);
        g.half_step.erase(g.half_step.begin() + 1);
    }
    return g;
}

struct Shot
{
    std::array<double, 3> residual{};
    std::vector<double> rho, drho; // at every substep when kept
    double int_hprime = 0.0;       // int_0^{x*} h'(rho)
};

inline double rho_dd(const ProblemParams& p, double x, double rho, double C)
{
    double hp = (p.eps > 0.0) ? p.eps * p.nl.d1(std::max(rho, 0.0)) : 0.0;
    return 0.5 * p.lambda * x * x + hp - C;
}

// RK4 on (rho, rho', mass, int h'(rho)) from 0 to x* with 4(M-1) substeps.
inline Shot shoot(const ProblemParams& p, double rho0, double C, double x_star, std::size_t M, bool keep)
{
    const std::size_t K = 4 * (M - 1);
    const double hs = x_star / static_cast<double>(K);
    using V = std::array<double, 4>;
    auto f = [&](double x, const V& y) -> V {
        double hp = (p.eps > 0.0) ? p.nl.d1(std::max(y[0], 0.0)) : 0.0;
        return {y[1], rho_dd(p, x, y[0], C), y[0], hp};
    };
    V y{rho0, 0.0, 0.0, 0.0};
    Shot out;
    if (keep) {
        out.rho.reserve(K + 1);
        out.drho.reserve(K + 1);
        out.rho.push_back(y[0]);
        out.drho.push_back(y[1]);
    }
    for (std::size_t k = 0; k < K; ++k) {
        double x = static_cast<double>(k) * hs;
        V k1 = f(x, y);
        V y2, y3, y4;
        for (int i = 0; i < 4; ++i)
            y2[i] = y[i] + 0.5 * hs * k1[i];
        V k2 = f(x + 0.5 * hs, y2);
        for (int i = 0; i < 4; ++i)
            y3[i] = y[i] + 0.5 * hs * k2[i];
        V k3 = f(x + 0.5 * hs, y3);
        for (int i = 0; i < 4; ++i)
            y4[i] = y[i] + hs * k3[i];
        V k4 = f(x + hs, y4);
        for (int i = 0; i < 4; ++i)
            y[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (keep) {
            out.rho.push_back(y[0]);
            out.drho.push_back(y[1]);
        }
    }
    out.residual = {y[0], y[1], 2.0 * y[2] - 1.0};
    out.int_hprime = y[3];
    return out;
}

inline double norm3(const std::array<double, 3>& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }

inline double smyth_hill_x_star(double lambda) { return std::pow(45.0 / (2.0 * lambda), 0.2); }

// sqrt(rho) data at the half nodes from the order-eps representation
// rho = (lambda/24)(x*^2 - x^2)^2 + eps * eta, eta(x) = (x* - x)^2 int_0^1 th eta''(x + th (x* - x)) dth.
inline void sqrt_profile_from_ode(StationaryProfile& st, const HalfGrid& g, const Shot& shot, double mbar)
{
    const ProblemParams& p = st.params;
    const double xs = st.x_star, lam = p.lambda, eps = p.eps, C = st.C_eps;
    const std::size_t n = g.half_x.size();
    st.s.assign(n, 0.0);
    st.ds.assign(n, 0.0);
    st.d2s.assign(n, 0.0);
    st.d3s.assign(n, 0.0);

    auto rho_at = [&](double t) {
        double u = std::clamp(t / g.hs, 0.0, static_cast<double>(g.substeps));
        std::size_t k = std::min(static_cast<std::size_t>(u), g.substeps - 1);
        double x0 = static_cast<double>(k) * g.hs;
        double r0 = shot.rho[k], r1 = shot.rho[k + 1];
        double q0 = rho_dd(p, x0, r0, C), q1 = rho_dd(p, x0 + g.hs, r1, C);
        auto v = quintic_hermite(g.hs, r0, shot.drho[k], q0, r1, shot.drho[k + 1], q1, u - static_cast<double>(k));
        return std::array<double, 2>{v[0], v[1]};
    };

    const auto& gl = gauss_rule<32>();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double x = g.half_x[i];
        std::array<double, 4> pk{};
        if (eps > 0.0) {
            const double L = xs - x;
            for (int q = 0; q < 32; ++q) {
                double th = gl.x[q];
                double t = x + th * L;
                auto rr = rho_at(t);
                double r = std::max(rr[0], 1e-300), r1 = rr[1];
                double r2 = rho_dd(p, t, r, C);
                double h1 = p.nl.d1(r), h2 = p.nl.d2(r), h3 = p.nl.d3(r), h4 = p.nl.d4(r);
                double r3 = lam * t + eps * h2 * r1;
                double e[4] = {h1 - mbar, h2 * r1, h3 * r1 * r1 + h2 * r2,
                               h4 * r1 * r1 * r1 + 3.0 * h3 * r1 * r2 + h2 * r3};
                double wq = gl.w[q] * th;
                for (int k = 0; k < 4; ++k) {
                    pk[k] += wq * e[k];
                    wq *= (1.0 - th);
                }
            }
        }
        const double a = xs + x;
        const double r0 = 1.0 / (a * a), rd1 = -2.0 * r0 / a, rd2 = 6.0 * r0 / (a * a), rd3 = -24.0 * r0 / (a * a * a);
        double q0 = pk[0] * r0;
        double q1 = pk[1] * r0 + pk[0] * rd1;
        double q2 = pk[2] * r0 + 2.0 * pk[1] * rd1 + pk[0] * rd2;
        double q3 = pk[3] * r0 + 3.0 * pk[2] * rd1 + 3.0 * pk[1] * rd2 + pk[0] * rd3;
        double u = lam / 24.0 + eps * q0;
        if (!(u > 0.0))
            throw SolverError("profile representation lost positivity at x = " + fmt17(x));
        double w = std::sqrt(u);
        double w1 = eps * q1 / (2.0 * w);
        double w2 = (eps * q2 - 2.0 * w1 * w1) / (2.0 * w);
        double w3 = (eps * q3 - 6.0 * w1 * w2) / (2.0 * w);
        double sg = xs * xs - x * x;
        st.s[i] = sg * w;
        st.ds[i] = -2.0 * x * w + sg * w1;
        st.d2s[i] = -2.0 * w - 4.0 * x * w1 + sg * w2;
        st.d3s[i] = -6.0 * w1 - 6.0 * x * w2 + sg * w3;
    }
    st.ds[0] = 0.0;
    st.d3s[0] = 0.0;
}

inline void finish_edge(StationaryProfile& st)
{
    const std::size_t n = st.half_x.size();
    st.s[n - 1] = 0.0;
    st.ds[n - 1] = -st.c1;
    st.d2s[n - 1] = -st.c2;
    double xa = st.half_x[n - 3], xb = st.half_x[n - 2], xe = st.half_x[n - 1];
    auto extrap = [&](const std::vector<double>& v) {
        return v[n - 2] + (v[n - 2] - v[n - 3]) * (xe - xb) / (xb - xa);
    };
    st.d3s[n - 1] = extrap(st.d3s);
    st.diag.c2_interior = -extrap(st.d2s);
}

inline void boundary_coefficients(StationaryProfile& st)
{
    const double A2 = 0.5 * st.params.lambda * st.x_star * st.x_star - st.C_eps;
    const double A3 = st.params.lambda * st.x_star;
    if (!(A2 > 0.0))
        throw SolverError("profile does not touch down quadratically (A2 <= 0)");
    st.c1 = std::sqrt(0.5 * A2);
    st.c2 = A3 / (3.0 * std::sqrt(2.0 * A2));
}

inline void curvature_modulus(StationaryProfile& st)
{
    double lt = st.c2;
    for (std::size_t i = 0; i + 1 < st.half_x.size(); ++i)
        lt = std::min(lt, -st.d2s[i]);
    st.lambda_tilde = lt;
}

// Post-solve checks shared by the closed form and the solver.
inline void fill_diagnostics(StationaryProfile& st, const std::function<double(double)>& rho_fine)
{
    const auto& x = st.profile.xs();
    const auto& v = st.profile.vals();
    const std::size_t M = x.size();
    const ProblemParams& p = st.params;
    const double h = st.grid_spacing();
    double el = 0.0;
    for (std::size_t j = 2; j + 2 < M; ++j) {
        double d2 = (-v[j - 2] + 16.0 * v[j - 1] - 30.0 * v[j] + 16.0 * v[j + 1] - v[j + 2]) / (12.0 * h * h);
        double hp = p.eps > 0.0 ? p.eps * p.nl.d1(v[j]) : 0.0;
        el = std::max(el, std::abs(-d2 + 0.5 * p.lambda * x[j] * x[j] + hp - st.C_eps));
    }
    st.diag.el_residual = el;
    double sym = 0.0;
    for (std::size_t j = 0; j < M; ++j)
        sym = std::max(sym, std::abs(v[j] - v[M - 1 - j]));
    st.diag.symmetry_error = sym;
    st.diag.mass_error = std::abs(st.profile.mass() - 1.0);

    // 4x finer one-sided differences of sqrt(rho) at x*
    const double d = h / 4.0;
    double f[4];
    for (int k = 0; k < 4; ++k)
        f[k] = std::sqrt(std::max(rho_fine(st.x_star - k * d), 0.0));
    st.diag.c1_fd = -(3.0 * f[0] - 4.0 * f[1] + f[2]) / (2.0 * d);
    st.diag.c2_fd = -(2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (d * d);
}

inline void validate_profile(const StationaryProfile& st)
{
    const auto& d = st.diag;
    auto fail = [](const std::string& what) { throw SolverError("stationary profile invalid: " + what); };
    if (d.symmetry_error > 1e-10)
        fail("asymmetric");
    if (d.mass_error > tol_mass)
        fail("mass " + fmt17(d.mass_error));
    if (d.el_residual > 1e-6)
        fail("Euler-Lagrange residual " + fmt17(d.el_residual));
    if (d.bc_residual > 1e3 * tol_el)
        fail("boundary residual " + fmt17(d.bc_residual));
    if (d.c_identity_residual > 1e-8)
        fail("constant identity residual " + fmt17(d.c_identity_residual));
    const auto& v = st.half_rho;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] + 1e-14)
            fail("not radially decreasing");
    double x0 = smyth_hill_x_star(st.params.lambda);
    if (st.x_star < 0.5 * x0 || st.x_star > 2.0 * x0)
        fail("support half-width out of range");
    if (!(st.lambda_tilde > convexity_gate * st.params.lambda_tilde0()))
        throw SolverError("eps too large for convexity (lambda_tilde = " + fmt17(st.lambda_tilde) + ")");
}

} // namespace detail

inline StationaryProfile smyth_hill(double lambda, std::size_t M)
{
    if (!(lambda > 0.0))
        throw InputError("lambda must be positive");
    if (M < 8)
        throw InputError("profile needs M >= 8");
    StationaryProfile st;
    st.params.lambda = lambda;
    st.params.eps = 0.0;
    st.M = M;
    const double xs = detail::smyth_hill_x_star(lambda);
    st.x_star = xs;
    st.C_eps = lambda / 6.0 * xs * xs;
    st.rho0 = lambda / 24.0 * std::pow(xs, 4);
    auto g = detail::make_half_grid(xs, M);
    auto rho = [&](double x) {
        double q = std::max(xs * xs - x * x, 0.0);
        return lambda / 24.0 * q * q;
    };
    std::vector<double> v(M);
    for (std::size_t j = 0; j < M; ++j)
        v[j] = rho(g.full_x[j]);
    v.front() = v.back() = 0.0;
    // coarse grids lose trapezoid mass; renormalize the samples
    st.profile = GridDensity::normalized(g.full_x, v);
    st.eta.assign(M, 0.0);
    st.half_x = g.half_x;
    const double a = std::sqrt(lambda / 24.0);
    for (double x : g.half_x) {
        st.half_rho.push_back(rho(x));
        st.s.push_back(a * (xs * xs - x * x));
        st.ds.push_back(-2.0 * a * x);
        st.d2s.push_back(-2.0 * a);
        st.d3s.push_back(0.0);
    }
    st.s.back() = 0.0;
    detail::boundary_coefficients(st);
    st.diag.c2_interior = -st.d2s[st.d2s.size() - 2];
    detail::curvature_modulus(st);
    detail::fill_diagnostics(st, rho);
    return st;
}

namespace detail
{

struct NewtonResult
{
    std::array<double, 3> u{};
    int iterations = 0;
    double residual = 0.0;
};

// Damped Newton on (rho(0), C, x*) with a central-difference Jacobian.
inline NewtonResult stationary_newton(const ProblemParams& p, std::size_t M, std::array<double, 3> u, int max_newton)
{
    auto F = shoot(p, u[0], u[1], u[2], M, false);
    double res = norm3(F.residual);
    int it = 0, polish = 0;
    while (true) {
        if (res <= tol_el) {
            if (polish >= 2)
                break;
            ++polish;
        }
        if (it >= max_newton) {
            if (res <= tol_el)
                break;
            throw SolverError("stationary Newton did not converge in " + std::to_string(max_newton) +
                              " iterations, residual " + fmt17(res));
        }
        ++it;
        Eigen::Matrix3d J;
        for (int k = 0; k < 3; ++k) {
            double dk = 1e-6 * std::max(std::abs(u[k]), 1e-2);
            auto up = u, um = u;
            up[k] += dk;
            um[k] -= dk;
            auto Fp = shoot(p, up[0], up[1], up[2], M, false).residual;
            auto Fm = shoot(p, um[0], um[1], um[2], M, false).residual;
            for (int i = 0; i < 3; ++i)
                J(i, k) = (Fp[i] - Fm[i]) / (2.0 * dk);
        }
        Eigen::Vector3d rhs(-F.residual[0], -F.residual[1], -F.residual[2]);
        Eigen::Vector3d d = J.fullPivLu().solve(rhs);
        double alpha = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half, alpha *= 0.5) {
            std::array<double, 3> un{u[0] + alpha * d[0], u[1] + alpha * d[1], u[2] + alpha * d[2]};
            if (!(un[0] > 0.0) || !(un[2] > 0.0))
                continue;
            auto Fn = shoot(p, un[0], un[1], un[2], M, false);
            double rn = norm3(Fn.residual);
            if (rn < res) {
                u = un;
                F = Fn;
                res = rn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (res <= tol_el)
                break;
            throw SolverError("stationary Newton stalled at residual " + fmt17(res));
        }
    }
    return {u, it, res};
}

// Continuation in eps from the unperturbed profile when the direct solve fails.
inline NewtonResult stationary_continuation(const ProblemParams& p, std::size_t M, int max_newton)
{
    const double x0 = smyth_hill_x_star(p.lambda);
    std::array<double, 3> u{p.lambda / 24.0 * std::pow(x0, 4), p.lambda / 6.0 * x0 * x0, x0};
    ProblemParams q = p;
    double done = 0.0, step = p.eps / 8.0;
    NewtonResult r{u, 0, 0.0};
    int total = 0;
    for (int solves = 0; done < p.eps; ++solves) {
        if (solves >= 30 || step < 1e-3 * p.eps)
            throw SolverError("no stationary profile at eps = " + fmt17(p.eps) + "; continuation stopped at eps = " +
                              fmt17(done) + ", where the profile branch ends");
        double next = std::min(p.eps, done + step);
        q.eps = next;
        try {
            r = stationary_newton(q, M, u, std::min(max_newton, 20));
        } catch (const SolverError&) {
            step *= 0.5;
            continue;
        }
        total += r.iterations;
        u = r.u;
        done = next;
        step *= 1.5;
    }
    r.iterations = total;
    return r;
}

} // namespace detail

struct StationaryOptions
{
    std::size_t M = 2048;
    bool unsafe_h = false;
    std::optional<std::array<double, 3>> initial; // (rho(0), C, x*)
    int max_newton = 50;
};

inline StationaryProfile solve_stationary(const ProblemParams& p, const StationaryOptions& opt = {})
{
    p.validate();
    const std::size_t M = opt.M;
    if (M < 8)
        throw InputError("profile needs M >= 8");
    if (p.eps > 0.0 && !opt.unsafe_h && !default_hypothesis_check(p.nl).pass)
        throw InputError("nonlinearity '" + p.nl.name + "' violates the admissibility bounds (use --unsafe-h)");

    const double x0 = detail::smyth_hill_x_star(p.lambda);
    std::array<double, 3> u0 = opt.initial.value_or(
        std::array<double, 3>{p.lambda / 24.0 * std::pow(x0, 4), p.lambda / 6.0 * x0 * x0, x0});
    detail::NewtonResult nr;
    try {
        nr = detail::stationary_newton(p, M, u0, opt.max_newton);
    } catch (const SolverError&) {
        if (!(p.eps > 0.0) || opt.initial)
            throw;
        nr = detail::stationary_continuation(p, M, opt.max_newton);
    }
    const auto& u = nr.u;
    const int it = nr.iterations;
    const double res = nr.residual;

    StationaryProfile st;
    st.params = p;
    st.M = M;
    st.rho0 = u[0];
    st.C_eps = u[1];
    st.x_star = u[2];
    st.diag.newton_iterations = it;
    st.diag.shooting_residual = res;

    auto g = detail::make_half_grid(st.x_star, M);
    auto shot = detail::shoot(p, u[0], u[1], u[2], M, true);
    st.diag.bc_residual = std::max(std::abs(shot.rho.back()), std::abs(shot.drho.back()));
    shot.rho.back() = 0.0;
    shot.drho.back() = 0.0;

    std::vector<double> v(M);
    for (std::size_t j = 0; j < M; ++j) {
        double ax = std::abs(g.full_x[j]);
        auto k = static_cast<std::size_t>(std::llround(ax / g.hs));
        v[j] = std::max(shot.rho[std::min(k, g.substeps)], 0.0);
    }
    st.profile = GridDensity(g.full_x, v);
    st.eta.assign(M, 0.0);
    if (p.eps > 0.0)
        for (std::size_t j = 0; j < M; ++j) {
            double q = st.x_star * st.x_star - g.full_x[j] * g.full_x[j];
            st.eta[j] = (v[j] - p.lambda / 24.0 * q * q) / p.eps;
        }
    st.half_x = g.half_x;
    for (std::size_t k : g.half_step)
        st.half_rho.push_back(shot.rho[k]);

    // int_0^{x*} h'(rho) by composite Simpson on the substep lattice
    double ih = 0.0;
    if (p.eps > 0.0) {
        for (std::size_t k = 0; k <= g.substeps; ++k) {
            double w = (k == 0 || k == g.substeps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            ih += w * p.nl.d1(std::max(shot.rho[k], 0.0));
        }
        ih *= g.hs / 3.0;
    }
    st.diag.c_identity_residual =
        std::abs(st.C_eps - p.lambda / 6.0 * st.x_star * st.x_star - p.eps / (2.0 * st.x_star) * (2.0 * ih));
    const double mbar = ih / st.x_star;

    detail::boundary_coefficients(st);
    detail::sqrt_profile_from_ode(st, g, shot, mbar);
    detail::finish_edge(st);
    detail::curvature_modulus(st);

    auto rho_fine = [&](double x) {
        double t = std::clamp(std::abs(x) / g.hs, 0.0, static_cast<double>(g.substeps));
        auto k = std::min(static_cast<std::size_t>(t), g.substeps - 1);
        double x0k = static_cast<double>(k) * g.hs;
        double q0 = detail::rho_dd(p, x0k, shot.rho[k], st.C_eps);
        double q1 = detail::rho_dd(p, x0k + g.hs, shot.rho[k + 1], st.C_eps);
        return quintic_hermite(g.hs, shot.rho[k], shot.drho[k], q0, shot.rho[k + 1], shot.drho[k + 1], q1,
                               t - static_cast<double>(k))[0];
    };
    detail::fill_diagnostics(st, rho_fine);
    detail::validate_profile(st);
    return st;
}

struct CurvatureBounds
{
    double min_neg_d2 = 0.0; // min of -(sqrt rho)''
    double max_neg_d2 = 0.0;
    double max_abs_d3 = 0.0;
};

// Interior nodes only; a boundary layer of three cells is skipped.
inline CurvatureBounds sqrt_profile_curvature_bounds(const StationaryProfile& st)
{
    CurvatureBounds b{INFINITY, -INFINITY, 0.0};
    const double layer = 3.0 * st.grid_spacing();
    for (std::size_t i = 0; i < st.half_x.size(); ++i) {
        if (st.x_star - st.half_x[i] < layer * (1.0 - 1e-12))
            continue;
        b.min_neg_d2 = std::min(b.min_neg_d2, -st.d2s[i]);
        b.max_neg_d2 = std::max(b.max_neg_d2, -st.d2s[i]);
        b.max_abs_d3 = std::max(b.max_abs_d3, std::abs(st.d3s[i]));
    }
    return b;
}

// Convex extension of -sqrt(rho_bar) by quadratics beyond the support.
class AuxiliaryPotential
{
public:
    explicit AuxiliaryPotential(std::shared_ptr<const StationaryProfile> st)
        : st_(std::move(st))
    {
        if (!(st_->c2 > 0.0))
            throw InputError("potential needs c2 > 0");
        for (std::size_t i = st_->half_x.size(); i-- > 0;)
            if (st_->half_x[i] > 0.0)
                nodes_.push_back(-st_->half_x[i]);
        for (double x : st_->half_x)
            nodes_.push_back(x);
    }

    const StationaryProfile& profile() const { return *st_; }
    double x_star() const { return st_->x_star; }
    double lambda_tilde() const { return st_->lambda_tilde; }
    double c1() const { return st_->c1; }
    double c2() const { return st_->c2; }

    // W, W', W'', W''' at x.
    std::array<double, 4> eval(double x) const
    {
        const double xs = st_->x_star, c1 = st_->c1, c2 = st_->c2;
        if (x >= xs) {
            double d = x - xs;
            return {c1 * d + 0.5 * c2 * d * d, c1 + c2 * d, c2, 0.0};
        }
        if (x <= -xs) {
            double d = x + xs;
            return {-c1 * d + 0.5 * c2 * d * d, -c1 + c2 * d, c2, 0.0};
        }
        auto s = st_->sqrt_profile(std::abs(x));
        double sg = x < 0.0 ? -1.0 : 1.0;
        return {-s[0], -sg * s[1], -s[2], -sg * s[3]};
    }

    double operator()(double x) const { return eval(x)[0]; }

    // rho_bar consistent with the potential: W^2 on the support.
    double rho_bar(double x) const
    {
        if (std::abs(x) >= st_->x_star)
            return 0.0;
        double s = st_->sqrt_profile(std::abs(x))[0];
        return s * s;
    }

    // Nodes of the piecewise representation, -x* ... x*.
    const std::vector<double>& nodes() const { return nodes_; }

private:
    std::shared_ptr<const StationaryProfile> st_;
    std::vector<double> nodes_;
};

inline AuxiliaryPotential build_potential(const StationaryProfile& st)
{
    return AuxiliaryPotential(std::make_shared<const StationaryProfile>(st));
}

} // namespace tfjko

#endif
