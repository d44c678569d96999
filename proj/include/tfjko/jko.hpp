// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_JKO_HPP
#define TFJKO_JKO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "functionals.hpp"
#include "ot1d.hpp"

namespace tfjko
{

inline constexpr double tol_step = 1e-9;
inline constexpr double gap_noise_floor = 1e-8;

struct JkoConfig
{
    double tau = 1e-3;
    double t_end = 1.0;
    std::size_t N = 256;
    double inner_tol = 0.0; // 0 selects 1e-10 sqrt(N)
    std::size_t inner_max = 500;
    std::size_t record_every = 10;
    bool keep_states = false;
    double gap_floor = 0.0; // 0 selects 1e-10 times the support width of the step's start

    double tolerance() const { return inner_tol > 0.0 ? inner_tol : 1e-10 * std::sqrt(static_cast<double>(N)); }

    void validate() const
    {
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw InputError("tau must be positive");
        if (!(t_end >= 0.0) || !std::isfinite(t_end))
            throw InputError("t_end must be nonnegative");
        if (N < 32)
            throw InputError("N must be at least 32");
        if (inner_tol < 0.0 || !std::isfinite(inner_tol))
            throw InputError("inner_tol must be positive");
        if (inner_max == 0)
            throw InputError("inner_max must be positive");
        if (record_every == 0)
            throw InputError("record_every must be positive");
    }
};

// Discrete energy in quantile variables. u_j = 1/(N (z_{j+1} - z_j)) lives on
// the midpoints xi = j/N and vanishes at xi = 0 and xi = 1.
class DiscreteEnergy
{
public:
    explicit DiscreteEnergy(const ProblemParams& p)
        : p_(p)
    {
        p_.validate();
    }

    const ProblemParams& params() const { return p_; }

    double value(const std::vector<double>& z) const
    {
        const std::size_t N = z.size();
        const double n = static_cast<double>(N);
        double D = 0.0, pot = 0.0, hsum = 0.0, prev = 0.0;
        for (std::size_t j = 0; j + 1 < N; ++j) {
            double u = 1.0 / (n * (z[j + 1] - z[j]));
            D += 0.5 * (prev + u) * (u - prev) * (u - prev);
            if (p_.eps > 0.0)
                hsum += p_.nl.eval(u) / u;
            prev = u;
        }
        D += 0.5 * prev * prev * prev;
        for (double x : z)
            pot += x * x;
        return 0.5 * n * D + 0.5 * p_.lambda * pot / n + p_.eps * hsum / n;
    }

    void gradient(const std::vector<double>& z, std::vector<double>& g) const
    {
        const std::size_t N = z.size();
        const double n = static_cast<double>(N);
        U_.assign(N + 1, 0.0);
        for (std::size_t j = 0; j + 1 < N; ++j)
            U_[j + 1] = 1.0 / (n * (z[j + 1] - z[j]));
        g.assign(N, 0.0);
        for (std::size_t i = 0; i < N; ++i)
            g[i] = p_.lambda * z[i] / n;
        for (std::size_t k = 1; k < N; ++k) {
            const double a = U_[k - 1], b = U_[k], c = U_[k + 1];
            double dD = n * (0.5 * (b - a) * (b - a) + (a + b) * (b - a) + 0.5 * (c - b) * (c - b) - (b + c) * (c - b));
            double G = 0.5 * dD;
            if (p_.eps > 0.0)
                G += p_.eps / n * (p_.nl.d1(b) / b - p_.nl.eval(b) / (b * b));
            double du = G * n * b * b;
            g[k - 1] += du;
            g[k] -= du;
        }
    }

private:
    ProblemParams p_;
    mutable std::vector<double> U_;
};

struct InnerStats
{
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool reverted = false;        // round-off left J above its start; the start was kept
    bool roundoff_limited = false; // stopped at the gradient's round-off floor above inner_tol
    double roundoff_floor = 0.0;
    double J_hat = 0.0, J_plus = 0.0;
};

struct StepResult
{
    QuantilePoints z_plus;
    InnerStats stats;
};

namespace detail
{

inline double norm2(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

inline std::string dump_iterate(const std::vector<double>& z)
{
    std::string s = "iterate:";
    for (std::size_t i = 0; i < z.size(); ++i)
        s += (i ? "," : " ") + fmt17(z[i]);
    return s;
}

} // namespace detail

// Minimizes E_N(z) + (1/2 tau)(1/N) sum (z - z_hat)^2 by Newton iterations on a
// banded finite-difference Hessian with backtracking.
class JkoStepper
{
public:
    JkoStepper(const ProblemParams& p, const JkoConfig& cfg)
        : E_(p)
        , cfg_(cfg)
    {
        cfg_.validate();
    }

    const DiscreteEnergy& energy() const { return E_; }
    const JkoConfig& config() const { return cfg_; }

    double objective(const std::vector<double>& z, const std::vector<double>& zh) const
    {
        const double n = static_cast<double>(z.size());
        double w = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            w += (z[i] - zh[i]) * (z[i] - zh[i]);
        return E_.value(z) + 0.5 * w / (cfg_.tau * n);
    }

    void objective_gradient(const std::vector<double>& z, const std::vector<double>& zh, std::vector<double>& g) const
    {
        E_.gradient(z, g);
        const double c = 1.0 / (cfg_.tau * static_cast<double>(z.size()));
        for (std::size_t i = 0; i < z.size(); ++i)
            g[i] += c * (z[i] - zh[i]);
    }

    StepResult step(const QuantilePoints& zhat) const
    {
        const std::vector<double>& zh = zhat.z();
        const std::size_t N = zh.size();
        if (N != cfg_.N)
            throw InputError("particle count does not match the configuration");
        const double floor = cfg_.gap_floor > 0.0 ? cfg_.gap_floor : 1e-10 * (zh.back() - zh.front());
        const double tol = cfg_.tolerance();
        const double diag = 1.0 / (cfg_.tau * static_cast<double>(N));

        std::vector<double> z = zh, g, trial(N), gp, gm, d(N);
        InnerStats st;
        st.J_hat = objective(zh, zh);
        double J = st.J_hat;
        objective_gradient(z, zh, g);
        st.grad_norm = detail::norm2(g);

        if (!pattern_ready_ || H_.rows() != static_cast<Eigen::Index>(N))
            build_pattern(N);

        double best = INFINITY;
        int stalled = 0;
        for (st.iterations = 0; st.iterations < cfg_.inner_max; ++st.iterations) {
            if (st.grad_norm <= tol) {
                st.converged = true;
                break;
            }
            assemble_hessian(z, diag, gp, gm);
            st.roundoff_floor = roundoff_floor(z);
            if (st.grad_norm < 0.5 * best) {
                best = st.grad_norm;
                stalled = 0;
            } else {
                ++stalled;
            }
            if (stalled >= 3 && st.grad_norm <= st.roundoff_floor) {
                st.converged = true;
                st.roundoff_limited = true;
                break;
            }
            Eigen::VectorXd rhs(N);
            for (std::size_t i = 0; i < N; ++i)
                rhs[i] = -g[i];
            Eigen::VectorXd sol;
            double shift = 0.0;
            for (int attempt = 0; attempt < 40; ++attempt) {
                if (shift > 0.0)
                    for (std::size_t i = 0; i < N; ++i)
                        H_.coeffRef(i, i) = Hdiag_[i] + shift;
                llt_.factorize(H_);
                if (llt_.info() == Eigen::Success) {
                    sol = llt_.solve(rhs);
                    if (sol.allFinite())
                        break;
                }
                shift = shift > 0.0 ? 10.0 * shift : diag * 1e-6 + 1e-12;
                sol.resize(0);
            }
            if (sol.size() == 0)
                throw SolverError("Hessian factorization failed; " + detail::dump_iterate(z));
            for (std::size_t i = 0; i < N; ++i)
                d[i] = sol[i];
            double slope = 0.0;
            for (std::size_t i = 0; i < N; ++i)
                slope += g[i] * d[i];
            if (!(slope < 0.0)) {
                for (std::size_t i = 0; i < N; ++i)
                    d[i] = -g[i] / diag;
                slope = -st.grad_norm * st.grad_norm / diag;
            }

            double alpha = 1.0;
            bool accepted = false;
            double Jt = J;
            std::vector<double> gt;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
                bool ordered = true;
                for (std::size_t i = 0; i < N; ++i)
                    trial[i] = z[i] + alpha * d[i];
                for (std::size_t i = 0; i + 1 < N; ++i)
                    if (!(trial[i + 1] - trial[i] > floor)) {
                        ordered = false;
                        break;
                    }
                if (!ordered)
                    continue;
                Jt = objective(trial, zh);
                if (Jt <= J + 1e-4 * alpha * slope) {
                    accepted = true;
                    break;
                }
                // near the minimum J is flat to round-off; accept steps that reduce the gradient
                if (std::abs(Jt - J) <= 1e-14 * std::max(1.0, std::abs(J))) {
                    objective_gradient(trial, zh, gt);
                    if (detail::norm2(gt) < st.grad_norm) {
                        accepted = true;
                        break;
                    }
                }
            }
            if (!accepted) {
                if (alpha < 1e-15 && st.grad_norm <= 1e3 * tol)
                    break;
                bool ordered = true;
                for (std::size_t i = 0; i + 1 < N; ++i)
                    ordered = ordered && (z[i] + 1e-18 * d[i] < z[i + 1] + 1e-18 * d[i + 1]);
                throw SolverError(std::string(ordered ? "line search failed" : "monotonicity lost at minimal step") +
                                  "; " + detail::dump_iterate(z));
            }
            z.swap(trial);
            J = Jt;
            objective_gradient(z, zh, g);
            st.grad_norm = detail::norm2(g);
        }
        if (!st.converged && st.grad_norm <= tol)
            st.converged = true;
        if (!st.converged)
            warn("inner solver stopped at gradient norm " + fmt17(st.grad_norm) + " after " +
                 std::to_string(st.iterations) + " iterations");
        if (J > st.J_hat) {
            z = zh;
            J = st.J_hat;
            st.reverted = true;
        }
        st.J_plus = J;
        return {QuantilePoints(std::move(z)), st};
    }

private:
    void build_pattern(std::size_t N) const
    {
        std::vector<Eigen::Triplet<double>> t;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = (i >= 2 ? i - 2 : 0); j <= std::min(N - 1, i + 2); ++j)
                t.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
        H_.resize(N, N);
        H_.setFromTriplets(t.begin(), t.end());
        H_.makeCompressed();
        llt_.analyzePattern(H_);
        Hdiag_.assign(N, 0.0);
        pattern_ready_ = true;
    }

    // Gradient change caused by rounding every position to its last bit.
    double roundoff_floor(const std::vector<double>& z) const
    {
        const double u = std::numeric_limits<double>::epsilon();
        double s = 0.0;
        for (int k = 0; k < H_.outerSize(); ++k) {
            double r = 0.0;
            for (Eigen::SparseMatrix<double>::InnerIterator it(H_, k); it; ++it)
                r += std::abs(it.value()) * std::abs(z[static_cast<std::size_t>(it.row())]);
            s += r * r;
        }
        return 2.0 * u * std::sqrt(s);
    }

    // Pentadiagonal Hessian of E_N by central differences of the gradient,
    // perturbing every fifth particle together.
    void assemble_hessian(const std::vector<double>& z, double diag, std::vector<double>& gp,
                          std::vector<double>& gm) const
    {
        const std::size_t N = z.size();
        std::vector<double> zp = z, zm = z;
        std::vector<double> step(N);
        for (std::size_t i = 0; i < N; ++i) {
            double left = i > 0 ? z[i] - z[i - 1] : z[1] - z[0];
            double right = i + 1 < N ? z[i + 1] - z[i] : left;
            step[i] = 1e-5 * std::min(left, right);
        }
        std::vector<double> cols(N * 5, 0.0); // rows i, offsets -2..2
        for (std::size_t c = 0; c < 5; ++c) {
            for (std::size_t j = c; j < N; j += 5) {
                zp[j] = z[j] + step[j];
                zm[j] = z[j] - step[j];
            }
            E_.gradient(zp, gp);
            E_.gradient(zm, gm);
            for (std::size_t j = c; j < N; j += 5) {
                for (std::size_t i = (j >= 2 ? j - 2 : 0); i <= std::min(N - 1, j + 2); ++i)
                    cols[i * 5 + (j + 2 - i)] = (gp[i] - gm[i]) / (2.0 * step[j]);
                zp[j] = z[j];
                zm[j] = z[j];
            }
        }
        for (int k = 0; k < H_.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(H_, k); it; ++it) {
                std::size_t i = static_cast<std::size_t>(it.row()), j = static_cast<std::size_t>(it.col());
                double hij = cols[i * 5 + (j + 2 - i)], hji = cols[j * 5 + (i + 2 - j)];
                it.valueRef() = 0.5 * (hij + hji) + (i == j ? diag : 0.0);
                if (i == j)
                    Hdiag_[i] = it.value();
            }
    }

    DiscreteEnergy E_;
    JkoConfig cfg_;
    mutable Eigen::SparseMatrix<double> H_;
    mutable std::vector<double> Hdiag_;
    mutable Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    mutable bool pattern_ready_ = false;
};

inline StepResult jko_step(const QuantilePoints& zhat, const ProblemParams& p, const JkoConfig& cfg)
{
    return JkoStepper(p, cfg).step(zhat);
}

// Minimizer of E_N alone, reached by long implicit steps from the quantiles of rho_bar.
inline QuantilePoints discrete_equilibrium(const ProblemParams& p, std::size_t N, const AuxiliaryPotential& W)
{
    const double xs = W.x_star();
    GridDensity bar = density_from_function(-xs, xs, 4 * N + 1, [&](double x) { return W.rho_bar(x); });
    JkoConfig cfg;
    cfg.N = N;
    cfg.tau = 10.0;
    JkoStepper stepper(p, cfg);
    QuantilePoints z = to_quantiles(bar, N);
    std::vector<double> g;
    const double tol = cfg.tolerance();
    for (int it = 0; it < 200; ++it) {
        auto r = stepper.step(z);
        double moved = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            moved = std::max(moved, std::abs(r.z_plus.z()[i] - z.z()[i]));
        z = r.z_plus;
        if (moved <= 1e-13 * (z.z().back() - z.z().front()))
            return z;
        stepper.energy().gradient(z.z(), g);
        if (detail::norm2(g) <= tol || (r.stats.roundoff_limited && r.stats.iterations <= 3))
            return z;
    }
    warn("discrete equilibrium: gradient norm " + fmt17(detail::norm2(g)));
    return z;
}

struct TraceRow
{
    double t = 0.0, E = 0.0, L = 0.0, production = 0.0, w2_step = 0.0, l1_to_eq = 0.0, entropy = 0.0,
           h2norm = 0.0;
};

struct StepRecord
{
    double t = 0.0; // time at the end of the step
    double E_hat = 0.0, E_plus = 0.0, w2 = 0.0;
    double L_hat = 0.0, L_plus = 0.0;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool energy_estimate = false; // w2/(2 tau) <= E_hat - E_plus
};

struct EvolutionTrace
{
    ProblemParams params;
    JkoConfig cfg;
    double L_bar = 0.0;
    double E_inf = 0.0; // min of E_N over the trajectory and the discrete equilibrium
    std::vector<TraceRow> rows;
    std::vector<StepRecord> steps;
    std::map<std::size_t, QuantilePoints> states; // step index -> particles, when kept
    QuantilePoints initial, final_state;
    GridDensity final_density;

    std::vector<double> times() const
    {
        std::vector<double> t;
        for (const auto& r : rows)
            t.push_back(r.t);
        return t;
    }
};

namespace detail
{

inline TraceRow trace_row(double t, const QuantilePoints& z, double E_N, double w2, const AuxiliaryPotential& W,
                          const GridDensity& bar)
{
    GridDensity rho = to_density(z);
    TraceRow r;
    r.t = t;
    r.E = E_N;
    r.L = lyapunov_L(rho, W);
    r.production = entropy_production(rho, W);
    r.w2_step = w2;
    r.l1_to_eq = l1_distance(rho, bar);
    r.entropy = entropy_H(rho);
    r.h2norm = sobolev_seminorms(rho).dxx2;
    return r;
}

} // namespace detail

inline EvolutionTrace evolve(const GridDensity& rho0, const ProblemParams& p, const JkoConfig& cfg,
                             const AuxiliaryPotential& W)
{
    p.validate();
    cfg.validate();
    if (std::abs(W.profile().params.lambda - p.lambda) > 0.0 || std::abs(W.profile().params.eps - p.eps) > 0.0)
        throw InputError("stationary profile does not match the problem parameters");
    EvolutionTrace tr;
    tr.params = p;
    tr.cfg = cfg;
    tr.L_bar = lyapunov_equilibrium(W);
    const double xs = W.x_star();
    GridDensity bar = density_from_function(-xs, xs, 4001, [&](double x) { return W.rho_bar(x); });

    JkoConfig c = cfg;
    QuantilePoints z = to_quantiles(rho0, cfg.N);
    if (c.gap_floor <= 0.0)
        c.gap_floor = 1e-10 * (z.z().back() - z.z().front());
    JkoStepper stepper(p, c);
    const auto& E = stepper.energy();
    tr.initial = z;

    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.tau - 1e-9));
    double E_cur = E.value(z.z());
    double L_cur = lyapunov_L(to_density(z), W);
    tr.E_inf = E_cur;
    tr.rows.push_back(detail::trace_row(0.0, z, E_cur, 0.0, W, bar));
    if (cfg.keep_states)
        tr.states.emplace(0, z);
    tr.steps.reserve(n_steps);

    for (std::size_t n = 0; n < n_steps; ++n) {
        StepResult res = stepper.step(z);
        const auto& zp = res.z_plus;
        StepRecord s;
        s.t = static_cast<double>(n + 1) * cfg.tau;
        s.E_hat = E_cur;
        s.E_plus = E.value(zp.z());
        s.w2 = w2_distance(zp, z);
        s.L_hat = L_cur;
        s.L_plus = lyapunov_L(to_density(zp), W);
        s.iterations = res.stats.iterations;
        s.grad_norm = res.stats.grad_norm;
        s.converged = res.stats.converged;
        // E(z+) + W2/(2 tau) <= E(z_hat), evaluated as the objective the solver guards
        s.energy_estimate = res.stats.J_plus <= res.stats.J_hat;
        tr.steps.push_back(s);
        z = zp;
        E_cur = s.E_plus;
        L_cur = s.L_plus;
        tr.E_inf = std::min(tr.E_inf, E_cur);
        if ((n + 1) % cfg.record_every == 0 || n + 1 == n_steps) {
            tr.rows.push_back(detail::trace_row(s.t, z, E_cur, s.w2, W, bar));
            if (cfg.keep_states)
                tr.states.emplace(n + 1, z);
        }
    }
    tr.final_state = z;
    tr.final_density = to_density(z);
    return tr;
}

// Lower bound for E_N, tightened by the discrete equilibrium when it is computed.
inline void tighten_energy_floor(EvolutionTrace& tr, const QuantilePoints& z_eq)
{
    tr.E_inf = std::min(tr.E_inf, DiscreteEnergy(tr.params).value(z_eq.z()));
}

struct RateFit
{
    double rate = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

// Least squares on log(gap) against t over [t0, t1], dropping gaps below the noise floor.
inline RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& gap, double t0, double t1,
                        double floor = gap_noise_floor)
{
    if (t.size() != gap.size())
        throw InputError("fit_rate needs matching series");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t0 - 1e-12 && t[i] <= t1 + 1e-12 && gap[i] > floor) {
            x.push_back(t[i]);
            y.push_back(std::log(gap[i]));
        }
    RateFit f;
    f.points = x.size();
    if (x.size() < 3)
        throw EvaluationError("fewer than three points above the noise floor in the fit window");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    double slope = sxy / sxx;
    f.rate = -slope;
    f.intercept = my - slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

inline RateFit fit_trace_rate(const EvolutionTrace& tr, double t0, double t1, double floor = gap_noise_floor)
{
    std::vector<double> t, gap;
    for (const auto& r : tr.rows) {
        t.push_back(r.t);
        gap.push_back(r.L - tr.L_bar);
    }
    return fit_rate(t, gap, t0, t1, floor);
}

struct AffineFit
{
    double intercept = 0.0, slope = 0.0, r2 = 0.0;
};

inline AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw InputError("fit_affine needs at least two matching points");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    AffineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

struct DecayReport
{
    double rate_emp = INFINITY; // per-step infimum over steps above the noise floor
    std::size_t steps_checked = 0;
    std::size_t envelope_steps = 0;  // prefix of steps on which the envelope is asserted
    std::size_t envelope_violations = 0;
    bool vacuous = false;
    bool monotone = true; // L nonincreasing within tol_step
};

inline DecayReport step_decay_check(const EvolutionTrace& tr, double floor = gap_noise_floor)
{
    DecayReport rep;
    const double tau = tr.cfg.tau;
    for (const auto& s : tr.steps) {
        if (s.L_plus > s.L_hat + tol_step * std::max(1.0, std::abs(s.L_hat)))
            rep.monotone = false;
        double gap = s.L_plus - tr.L_bar;
        if (gap <= floor)
            continue;
        ++rep.steps_checked;
        rep.rate_emp = std::min(rep.rate_emp, (s.L_hat - s.L_plus) / (tau * gap));
    }
    if (rep.steps_checked == 0) {
        rep.vacuous = true;
        rep.rate_emp = 0.0;
        return rep;
    }
    if (tr.steps.empty())
        return rep;
    const double gap0 = tr.steps.front().L_hat - tr.L_bar;
    double env = gap0;
    for (const auto& s : tr.steps) {
        double gap = s.L_plus - tr.L_bar;
        if (gap <= floor)
            break;
        env /= 1.0 + rep.rate_emp * tau;
        ++rep.envelope_steps;
        if (gap > env * (1.0 + tol_step) + tol_step * floor)
            ++rep.envelope_violations;
    }
    return rep;
}

struct HolderReport
{
    std::size_t pairs = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0; // max W^2 / bound
};

// W^2(rho(s), rho(t)) <= 2 (E_0 - inf E)(t - s + tau) on pairs of kept states.
inline HolderReport holder_check(const EvolutionTrace& tr, std::size_t pairs, std::uint64_t seed)
{
    HolderReport rep;
    if (tr.states.size() < 2)
        throw InputError("holder_check needs kept states");
    std::vector<std::size_t> idx;
    for (const auto& kv : tr.states)
        idx.push_back(kv.first);
    UniformStream U(seed);
    const double E0 = DiscreteEnergy(tr.params).value(tr.initial.z());
    const double drop = E0 - tr.E_inf;
    for (std::size_t k = 0; k < pairs; ++k) {
        std::size_t a = U.raw() % idx.size(), b = U.raw() % idx.size();
        if (a == b)
            b = (a + 1) % idx.size();
        std::size_t i = std::min(idx[a], idx[b]), j = std::max(idx[a], idx[b]);
        double w2 = w2_distance(tr.states.at(i), tr.states.at(j));
        double bound = 2.0 * drop * (static_cast<double>(j - i) * tr.cfg.tau + tr.cfg.tau);
        ++rep.pairs;
        double ratio = bound > 0.0 ? w2 / bound : (w2 > 0.0 ? INFINITY : 0.0);
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        if (w2 > bound * (1.0 + tol_step))
            ++rep.violations;
    }
    return rep;
}

struct H2Report
{
    double lhs = 0.0, rhs = 0.0;
    bool pass = false;
};

// Report-only: int (rho+_xx)^2 against the entropy dissipation bound on reconstructed grids.
inline H2Report h2_bound_check(const QuantilePoints& z_hat, const QuantilePoints& z_plus, const ProblemParams& p,
                               double tau)
{
    GridDensity rh = to_density(z_hat), rp = to_density(z_plus);
    auto sp = sobolev_seminorms(rp);
    H2Report r;
    r.lhs = sp.dxx2;
    r.rhs = (entropy_H(rh) - entropy_H(rp)) / tau + p.lambda + p.eps * 0.5 * p.nl.A * sp.dx2;
    r.pass = r.lhs <= r.rhs + tol_step * std::max({1.0, std::abs(r.lhs), std::abs(r.rhs)});
    return r;
}

// Smooth bump exp(-1/(1 - y^2)), y = (x - center)/radius.
struct Mollifier
{
    double center = 0.0, radius = 1.0;

    std::array<double, 3> eval(double x) const
    {
        double y = (x - center) / radius;
        if (!(y > -1.0 && y < 1.0))
            return {0.0, 0.0, 0.0};
        double q = 1.0 - y * y;
        double f = std::exp(-1.0 / q);
        double d1 = f * (-2.0 * y / (q * q));
        double d2 = f * ((6.0 * y * y * y * y - 2.0) / (q * q * q * q));
        return {f, d1 / radius, d2 / (radius * radius)};
    }

    double sup_d2() const
    {
        static const double unit = [] {
            double m = 0.0;
            Mollifier b;
            for (int i = 1; i < 200000; ++i)
                m = std::max(m, std::abs(b.eval(-1.0 + i * 1e-5)[2]));
            return m;
        }();
        return unit / (radius * radius);
    }
};

inline constexpr std::size_t mollifier_count = 10;

// The builtin family: five centers across the support scale, two radii.
inline Mollifier mollifier(std::size_t id, double scale)
{
    if (id >= mollifier_count)
        throw InputError("unknown mollifier id " + std::to_string(id));
    static const double centers[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    return {centers[id % 5] * scale, (id < 5 ? 0.5 : 1.0) * scale};
}

struct WeakResidual
{
    double residual = 0.0;
    double bound = 0.0;
    bool trivial = false; // test function misses every particle
    bool pass = false;
};

// Weak form of the step's optimality condition tested against zeta, in
// particle coordinates; the slack term accounts for the stopping gradient.
inline WeakResidual weak_residual_check(const QuantilePoints& z_hat, const QuantilePoints& z_plus,
                                        const ProblemParams& p, double tau, const Mollifier& zeta)
{
    const auto& zh = z_hat.z();
    const auto& zp = z_plus.z();
    const std::size_t N = zp.size();
    if (zh.size() != N)
        throw InputError("particle counts differ");
    const double n = static_cast<double>(N);
    DiscreteEnergy E(p);
    std::vector<double> gE;
    E.gradient(zp, gE);
    double diff = 0.0, flux = 0.0, slack = 0.0, w2 = 0.0;
    bool touched = false;
    for (std::size_t i = 0; i < N; ++i) {
        auto a = zeta.eval(zp[i]);
        auto b = zeta.eval(zh[i]);
        touched = touched || a[0] > 0.0 || b[0] > 0.0;
        diff += a[0] - b[0];
        flux += gE[i] * a[1];
        double gi = gE[i] + (zp[i] - zh[i]) / (tau * n);
        slack += std::abs(gi * a[1]);
        w2 += (zp[i] - zh[i]) * (zp[i] - zh[i]);
    }
    w2 /= n;
    WeakResidual r;
    r.trivial = !touched;
    r.residual = std::abs(diff / (n * tau) + flux);
    r.bound = 0.5 / tau * zeta.sup_d2() * w2 + slack;
    r.pass = r.residual <= r.bound * (1.0 + tol_step) + 1e-14;
    if (r.trivial)
        warn("test function support misses the density");
    return r;
}

} // namespace tfjko

#endif
