// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_DENSITY_HPP
#define TFJKO_DENSITY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "common.hpp"
#include "quadrature.hpp"

namespace tfjko
{

inline constexpr double tol_mass = 1e-8;

// Piecewise-linear function on strictly increasing nodes, zero outside.
struct PiecewiseLinear
{
    std::vector<double> xs;
    std::vector<double> vals;

    double operator()(double x) const
    {
        if (xs.empty() || x < xs.front() || x > xs.back())
            return 0.0;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end())
            return vals.back();
        std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
        double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
        return vals[j] + t * (vals[j + 1] - vals[j]);
    }

    double integral() const
    {
        double s = 0.0;
        for (std::size_t j = 0; j + 1 < xs.size(); ++j)
            s += 0.5 * (vals[j] + vals[j + 1]) * (xs[j + 1] - xs[j]);
        return s;
    }
};

inline void check_nodes(const std::vector<double>& xs, const std::vector<double>& vals, std::size_t min_size)
{
    if (xs.size() != vals.size())
        throw InputError("node and value arrays differ in length");
    if (xs.size() < min_size)
        throw InputError("need at least " + std::to_string(min_size) + " nodes");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(vals[i]))
            throw InputError("non-finite node or value");
        if (i > 0 && !(xs[i] > xs[i - 1]))
            throw InputError("abscissae must be strictly increasing");
    }
}

class GridDensity
{
public:
    GridDensity() = default;

    GridDensity(std::vector<double> xs, std::vector<double> vals)
        : f_{std::move(xs), std::move(vals)}
    {
        check_nodes(f_.xs, f_.vals, 3);
        for (double v : f_.vals)
            if (v < 0.0)
                throw InputError("density values must be nonnegative");
        double m = f_.integral();
        if (std::abs(m - 1.0) > tol_mass)
            throw InputError("density mass " + fmt17(m) + " is not 1");
    }

    static GridDensity normalized(std::vector<double> xs, std::vector<double> vals)
    {
        for (auto& v : vals)
            v = std::max(v, 0.0);
        PiecewiseLinear f{xs, vals};
        check_nodes(f.xs, f.vals, 3);
        double m = f.integral();
        if (!(m > 0.0))
            throw InputError("density has no mass");
        for (auto& v : vals)
            v /= m;
        return GridDensity(std::move(xs), std::move(vals));
    }

    const std::vector<double>& xs() const { return f_.xs; }
    const std::vector<double>& vals() const { return f_.vals; }
    const PiecewiseLinear& function() const { return f_; }
    std::size_t size() const { return f_.xs.size(); }
    double left() const { return f_.xs.front(); }
    double right() const { return f_.xs.back(); }
    double operator()(double x) const { return f_(x); }
    double mass() const { return f_.integral(); }

    // Node-wise cumulative mass.
    std::vector<double> cumulative() const
    {
        std::vector<double> F(size(), 0.0);
        for (std::size_t j = 0; j + 1 < size(); ++j)
            F[j + 1] = F[j] + 0.5 * (f_.vals[j] + f_.vals[j + 1]) * (f_.xs[j + 1] - f_.xs[j]);
        return F;
    }

private:
    PiecewiseLinear f_;
};

inline std::vector<double> uniform_nodes(double a, double b, std::size_t M) { return linspace(a, b, M); }

inline GridDensity density_from_function(double a, double b, std::size_t M, const std::function<double(double)>& f)
{
    auto xs = uniform_nodes(a, b, M);
    std::vector<double> v(M);
    for (std::size_t i = 0; i < M; ++i)
        v[i] = f(xs[i]);
    return GridDensity::normalized(std::move(xs), std::move(v));
}

// Cellwise exact moments of a piecewise-linear density.
inline double moment(const GridDensity& rho, int k)
{
    const auto& x = rho.xs();
    const auto& v = rho.vals();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        double a = x[j], b = x[j + 1];
        // integrand x^k * linear is a polynomial of degree k + 1 <= 3
        s += gauss<2>(a, b, [&](double y) {
            double l = v[j] + (v[j + 1] - v[j]) * (y - a) / (b - a);
            return std::pow(y, k) * l;
        });
    }
    return s;
}

inline double second_moment(const GridDensity& rho) { return moment(rho, 2); }
inline double mean(const GridDensity& rho) { return moment(rho, 1); }

class QuantilePoints
{
public:
    QuantilePoints() = default;

    explicit QuantilePoints(std::vector<double> z)
        : z_(std::move(z))
    {
        if (z_.size() < 2)
            throw InputError("need at least two particles");
        for (std::size_t i = 0; i < z_.size(); ++i) {
            if (!std::isfinite(z_[i]))
                throw InputError("non-finite particle position");
            if (i > 0 && !(z_[i] > z_[i - 1]))
                throw InputError("particle positions must be strictly increasing");
        }
    }

    const std::vector<double>& z() const { return z_; }
    std::size_t size() const { return z_.size(); }
    double operator[](std::size_t i) const { return z_[i]; }

    // u_{i+1/2} = (1/N) / (z_{i+1} - z_i)
    std::vector<double> cell_densities() const
    {
        const double N = static_cast<double>(z_.size());
        std::vector<double> u(z_.size() - 1);
        for (std::size_t i = 0; i + 1 < z_.size(); ++i)
            u[i] = 1.0 / (N * (z_[i + 1] - z_[i]));
        return u;
    }

private:
    std::vector<double> z_;
};

// Inverse CDF of a piecewise-linear density.  On a zero-density plateau the
// leftmost preimage is returned.
class QuantileFunction
{
public:
    explicit QuantileFunction(const GridDensity& rho)
        : rho_(&rho)
        , F_(rho.cumulative())
    {
    }

    const std::vector<double>& cumulative() const { return F_; }

    double cdf(double x) const
    {
        const auto& xs = rho_->xs();
        const auto& v = rho_->vals();
        if (x <= xs.front())
            return 0.0;
        if (x >= xs.back())
            return F_.back();
        std::size_t j = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
        double h = xs[j + 1] - xs[j], t = x - xs[j];
        return F_[j] + v[j] * t + 0.5 * (v[j + 1] - v[j]) / h * t * t;
    }

    double operator()(double xi) const
    {
        const auto& xs = rho_->xs();
        const auto& v = rho_->vals();
        if (xi <= 0.0) {
            auto k = static_cast<std::size_t>(std::upper_bound(F_.begin(), F_.end(), 0.0) - F_.begin());
            return xs[k == 0 ? 0 : k - 1];
        }
        if (xi >= F_.back()) {
            auto k = static_cast<std::size_t>(std::lower_bound(F_.begin(), F_.end(), F_.back()) - F_.begin());
            return xs[k];
        }
        auto k = static_cast<std::size_t>(std::lower_bound(F_.begin(), F_.end(), xi) - F_.begin());
        if (F_[k] == xi)
            return xs[k];
        std::size_t j = k - 1;
        double h = xs[j + 1] - xs[j];
        double m = xi - F_[j];
        double a0 = v[j];
        double kk = (v[j + 1] - v[j]) / h;
        double disc = std::max(a0 * a0 + 2.0 * kk * m, 0.0);
        double t = 2.0 * m / (a0 + std::sqrt(disc));
        return xs[j] + std::clamp(t, 0.0, h);
    }

    // Quantile level images of the nodes, i.e. the breakpoints of X in xi.
    const std::vector<double>& breakpoints() const { return F_; }

private:
    const GridDensity* rho_;
    std::vector<double> F_;
};

inline bool has_interior_plateau(const GridDensity& rho)
{
    const auto F = rho.cumulative();
    for (std::size_t j = 0; j + 1 < F.size(); ++j)
        if (F[j + 1] == F[j] && F[j] > 0.0 && F[j] < F.back())
            return true;
    return false;
}

inline QuantilePoints to_quantiles(const GridDensity& rho, std::size_t N)
{
    if (N < 8)
        throw InputError("to_quantiles needs N >= 8");
    if (std::abs(rho.mass() - 1.0) > tol_mass)
        throw InputError("to_quantiles needs unit mass");
    if (has_interior_plateau(rho))
        warn("zero-density plateau: leftmost quantile used");
    QuantileFunction X(rho);
    std::vector<double> z(N);
    for (std::size_t i = 0; i < N; ++i)
        z[i] = X((static_cast<double>(i) + 0.5) / static_cast<double>(N));
    return QuantilePoints(std::move(z));
}

// Native reconstruction: u_{i+1/2} at cell midpoints, ramps to zero at
// z_1 - 1.5 gap_1 and z_N + 1.5 gap_N (the ramp then carries the end masses).
inline GridDensity to_density(const QuantilePoints& q)
{
    const auto& z = q.z();
    const std::size_t N = z.size();
    auto u = q.cell_densities();
    std::vector<double> xs, vals;
    xs.reserve(N + 1);
    vals.reserve(N + 1);
    xs.push_back(z[0] - 1.5 * (z[1] - z[0]));
    vals.push_back(0.0);
    for (std::size_t i = 0; i + 1 < N; ++i) {
        xs.push_back(0.5 * (z[i] + z[i + 1]));
        vals.push_back(u[i]);
    }
    xs.push_back(z[N - 1] + 1.5 * (z[N - 1] - z[N - 2]));
    vals.push_back(0.0);
    return GridDensity::normalized(std::move(xs), std::move(vals));
}

inline GridDensity resample(const GridDensity& rho, double a, double b, std::size_t M)
{
    auto xs = uniform_nodes(a, b, M);
    std::vector<double> v(M);
    for (std::size_t i = 0; i < M; ++i)
        v[i] = rho(xs[i]);
    v.front() = 0.0;
    v.back() = 0.0;
    return GridDensity::normalized(std::move(xs), std::move(v));
}

inline GridDensity to_grid(const QuantilePoints& q, std::size_t M)
{
    if (M < 3)
        throw InputError("to_grid needs M >= 3");
    GridDensity native = to_density(q);
    return resample(native, native.left(), native.right(), M);
}

inline std::vector<double> merged_nodes(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Exact integral of |a - b|; crossings inside cells are split out.
inline double l1_distance(const GridDensity& a, const GridDensity& b)
{
    // one-sided limits honour the jumps at support ends
    auto side = [](const GridDensity& r, double x, bool from_right) {
        if (x < r.left() || x > r.right())
            return 0.0;
        if ((from_right && x == r.right()) || (!from_right && x == r.left()))
            return 0.0;
        return r(x);
    };
    auto xs = merged_nodes(a.xs(), b.xs());
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        double x0 = xs[j], x1 = xs[j + 1];
        double d0 = side(a, x0, true) - side(b, x0, true);
        double d1 = side(a, x1, false) - side(b, x1, false);
        if (d0 * d1 < 0.0) {
            double w = (x1 - x0) * std::abs(d0) / (std::abs(d0) + std::abs(d1));
            s += 0.5 * std::abs(d0) * w + 0.5 * std::abs(d1) * (x1 - x0 - w);
        } else {
            s += 0.5 * (std::abs(d0) + std::abs(d1)) * (x1 - x0);
        }
    }
    return s;
}

// Density with nonzero end values continued by a linear ramp to zero over one
// adjacent cell width; used wherever derivatives are taken.
inline PiecewiseLinear closed(const GridDensity& rho)
{
    PiecewiseLinear f = rho.function();
    if (f.vals.front() != 0.0) {
        double h = f.xs[1] - f.xs[0];
        f.xs.insert(f.xs.begin(), f.xs.front() - h);
        f.vals.insert(f.vals.begin(), 0.0);
    }
    if (f.vals.back() != 0.0) {
        double h = f.xs[f.xs.size() - 1] - f.xs[f.xs.size() - 2];
        f.xs.push_back(f.xs.back() + h);
        f.vals.push_back(0.0);
    }
    return f;
}

struct SobolevSeminorms
{
    double dx2 = 0.0;  // int rho_x^2
    double dxx2 = 0.0; // int rho_xx^2
};

inline SobolevSeminorms sobolev_seminorms(const GridDensity& rho)
{
    PiecewiseLinear f = closed(rho);
    // pad with zeros so every node has two neighbours
    double h0 = f.xs[1] - f.xs[0], hn = f.xs.back() - f.xs[f.xs.size() - 2];
    f.xs.insert(f.xs.begin(), f.xs.front() - h0);
    f.vals.insert(f.vals.begin(), 0.0);
    f.xs.push_back(f.xs.back() + hn);
    f.vals.push_back(0.0);
    SobolevSeminorms out;
    for (std::size_t j = 0; j + 1 < f.xs.size(); ++j) {
        double slope = (f.vals[j + 1] - f.vals[j]) / (f.xs[j + 1] - f.xs[j]);
        out.dx2 += slope * slope * (f.xs[j + 1] - f.xs[j]);
    }
    for (std::size_t i = 1; i + 1 < f.xs.size(); ++i) {
        double hm = f.xs[i] - f.xs[i - 1], hp = f.xs[i + 1] - f.xs[i];
        double d2 = 2.0 * ((f.vals[i + 1] - f.vals[i]) / hp - (f.vals[i] - f.vals[i - 1]) / hm) / (hm + hp);
        out.dxx2 += d2 * d2 * 0.5 * (hm + hp);
    }
    return out;
}

// int rho log rho, exact per cell, 0 log 0 = 0.
inline double entropy_H(const GridDensity& rho)
{
    auto F = [](double u) { return u > 0.0 ? 0.5 * u * u * std::log(u) - 0.25 * u * u : 0.0; };
    auto ulogu = [](double u) { return u > 0.0 ? u * std::log(u) : 0.0; };
    const auto& x = rho.xs();
    const auto& v = rho.vals();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        double h = x[j + 1] - x[j], a = v[j], b = v[j + 1];
        if (std::abs(b - a) <= 1e-7 * std::max(a, b))
            s += h * ulogu(0.5 * (a + b));
        else
            s += h * (F(b) - F(a)) / (b - a);
    }
    return s;
}

} // namespace tfjko

#endif
