// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_NONLINEARITY_HPP
#define TFJKO_NONLINEARITY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "common.hpp"

namespace tfjko
{

using ScalarFn = std::function<double(double)>;

// Second-order perturbation h with derivatives up to order four and the
// constants of the admissibility bounds.  d3 and d4 are only queried at r > 0.
struct Nonlinearity
{
    std::string name;
    ScalarFn eval;
    ScalarFn d1, d2, d3, d4;
    double A = 0.0;
    ScalarFn L_of;
};

inline Nonlinearity zero_nonlinearity()
{
    auto zero = [](double) { return 0.0; };
    return {"zero", zero, zero, zero, zero, zero, 0.0, [](double) { return 0.0; }};
}

// h(r) = r^{5/2} / (1 + r).  Constants come from scripts/sweep_constants.py:
// A is the r -> 0 limit 2 * 15/4, L_H is the global supremum so it serves every H.
inline Nonlinearity h1_nonlinearity()
{
    Nonlinearity nl;
    nl.name = "h1";
    nl.eval = [](double r) {
        r = std::max(r, 0.0);
        return r * r * std::sqrt(r) / (1.0 + r);
    };
    nl.d1 = [](double r) {
        r = std::max(r, 0.0);
        double q = 1.0 + r;
        return 0.5 * r * std::sqrt(r) * (3.0 * r + 5.0) / (q * q);
    };
    nl.d2 = [](double r) {
        r = std::max(r, 0.0);
        double q = 1.0 + r;
        return 0.25 * std::sqrt(r) * (3.0 * r * r + 10.0 * r + 15.0) / (q * q * q);
    };
    nl.d3 = [](double r) {
        double q = 1.0 + r;
        return 0.375 * (5.0 - 15.0 * r - 5.0 * r * r - r * r * r) / (std::sqrt(r) * q * q * q * q);
    };
    nl.d4 = [](double r) {
        double q = 1.0 + r;
        double num = 3.0 * r * r * r * r + 20.0 * r * r * r + 90.0 * r * r - 60.0 * r - 5.0;
        return 0.1875 * num / (r * std::sqrt(r) * q * q * q * q * q);
    };
    nl.A = 7.5;
    nl.L_of = [](double) { return 9.41519255384073; };
    return nl;
}

namespace detail
{
inline std::map<std::string, std::function<Nonlinearity()>>& registry()
{
    static std::map<std::string, std::function<Nonlinearity()>> reg{
        {"zero", zero_nonlinearity},
        {"h1", h1_nonlinearity},
    };
    return reg;
}
inline std::mutex& registry_mutex()
{
    static std::mutex m;
    return m;
}
} // namespace detail

inline void register_nonlinearity(const std::string& name, std::function<Nonlinearity()> factory)
{
    std::lock_guard lock(detail::registry_mutex());
    detail::registry()[name] = std::move(factory);
}

inline Nonlinearity find_nonlinearity(const std::string& name)
{
    std::lock_guard lock(detail::registry_mutex());
    auto it = detail::registry().find(name);
    if (it == detail::registry().end())
        throw InputError("unknown nonlinearity '" + name + "'");
    return it->second();
}

inline std::vector<std::string> nonlinearity_names()
{
    std::lock_guard lock(detail::registry_mutex());
    std::vector<std::string> out;
    for (const auto& kv : detail::registry())
        out.push_back(kv.first);
    return out;
}

struct BoundRatio
{
    double worst = 0.0; // sup of |value| / bound over the samples
    double at = 0.0;    // sample attaining it
};

struct HypothesisReport
{
    BoundRatio d2;      // |h''| <= (A/2) min(r^-1/2, r^1/2)
    BoundRatio d4;      // |h''''| <= L_H / (8 r^{3/2}), r <= H
    BoundRatio d1;      // |h'| <= (A/3) r^{3/2}
    BoundRatio h;       // |h| <= (2A/15) r^{5/2}
    double h_at_zero = 0.0;
    double d1_near_zero = 0.0;
    bool pass = false;
};

inline constexpr double tol_hyp = 1e-9;

inline HypothesisReport hypothesis_check(const Nonlinearity& nl, const std::vector<double>& r_samples, double H)
{
    if (r_samples.empty())
        throw InputError("hypothesis_check: empty sample");
    for (double r : r_samples)
        if (!(r > 0.0))
            throw InputError("hypothesis_check: samples must be positive");
    if (H < *std::max_element(r_samples.begin(), r_samples.end()))
        throw InputError("hypothesis_check: H below the largest sample");

    auto checked = [&](const ScalarFn& f, double r, const char* what) {
        double v = f(r);
        if (!std::isfinite(v))
            throw EvaluationError(std::string("non-finite ") + what + " of '" + nl.name + "' at r = " + fmt17(r));
        return v;
    };
    auto update = [](BoundRatio& b, double value, double bound, double r) {
        double ratio = (value == 0.0) ? 0.0 : (bound > 0.0 ? std::abs(value) / bound : INFINITY);
        if (ratio > b.worst) {
            b.worst = ratio;
            b.at = r;
        }
    };

    HypothesisReport rep;
    const double LH = nl.L_of(H);
    for (double r : r_samples) {
        double sr = std::sqrt(r);
        update(rep.d2, checked(nl.d2, r, "h''"), 0.5 * nl.A * std::min(1.0 / sr, sr), r);
        update(rep.d4, checked(nl.d4, r, "h''''"), LH / (8.0 * r * sr), r);
        update(rep.d1, checked(nl.d1, r, "h'"), nl.A / 3.0 * r * sr, r);
        update(rep.h, checked(nl.eval, r, "h"), 2.0 * nl.A / 15.0 * r * r * sr, r);
    }
    rep.h_at_zero = nl.eval(0.0);
    rep.d1_near_zero = nl.d1(1e-300);
    const double lim = 1.0 + tol_hyp;
    rep.pass = rep.d2.worst <= lim && rep.d4.worst <= lim && rep.d1.worst <= lim && rep.h.worst <= lim &&
               rep.h_at_zero == 0.0 && std::abs(rep.d1_near_zero) <= 1e-100;
    return rep;
}

// Default admissibility probe used by the solvers.
inline HypothesisReport default_hypothesis_check(const Nonlinearity& nl)
{
    return hypothesis_check(nl, logspace(1e-8, 1e4, 200), 1e4);
}

inline double g_eval(const Nonlinearity& nl, double r)
{
    if (r <= 0.0)
        return 0.0;
    return 2.0 * std::sqrt(r) * nl.d2(r);
}

inline double bregman_df(double r, double rbar)
{
    double sr = std::sqrt(r), sb = std::sqrt(rbar);
    // (2/3) r^{3/2} - (2/3) rbar^{3/2} - sb (r - rbar) = (sr - sb)^2 (2 sr + sb) / 3
    double d = sr - sb;
    return d * d * (2.0 * sr + sb) / 3.0;
}

} // namespace tfjko

#endif
