// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <cli.hpp>

using namespace tfjko;
namespace fs = std::filesystem;

namespace
{

struct Verdict
{
    bool pass = false;
    std::string detail;
};

class Clock
{
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string num(double v, int digits = 4)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

ProblemParams h1_params(double eps)
{
    ProblemParams p;
    p.eps = eps;
    p.nl = h1_nonlinearity();
    return p;
}

double sh_value(double xs, double x)
{
    double q = std::max(xs * xs - x * x, 0.0);
    return q * q / 24.0;
}

const std::vector<double> eps_sweep{1e-4, 2e-4, 4e-4};

std::map<double, StationaryProfile>& profiles()
{
    static std::map<double, StationaryProfile> m;
    return m;
}

const StationaryProfile& profile(double eps)
{
    auto& m = profiles();
    auto it = m.find(eps);
    if (it == m.end())
        it = m.emplace(eps, solve_stationary(h1_params(eps))).first;
    return it->second;
}

// Trajectory from the equilibrium translated by 0.5, with everything the
// step-level checks need.
struct Run
{
    double eps = 0.0, tau = 0.0;
    std::size_t N = 0;
    EvolutionTrace trace;
    RateFit fit;
    double seconds = 0.0;
};

Run trajectory(double eps, double tau, std::size_t N)
{
    Clock clock;
    Run r;
    r.eps = eps;
    r.tau = tau;
    r.N = N;
    auto p = h1_params(eps);
    auto W = build_potential(profile(eps));
    const double xs = W.x_star();
    auto rho0 = density_from_function(0.5 - xs, 0.5 + xs, 4 * N + 1, [&](double x) { return W.rho_bar(x - 0.5); });
    JkoConfig cfg;
    cfg.tau = tau;
    cfg.N = N;
    cfg.t_end = 3.0;
    cfg.record_every = static_cast<std::size_t>(std::llround(1e-2 / tau));
    cfg.keep_states = true;
    r.trace = evolve(rho0, p, cfg, W);
    tighten_energy_floor(r.trace, discrete_equilibrium(p, N, W));
    r.fit = fit_trace_rate(r.trace, 0.5, 3.0);
    r.seconds = clock.seconds();
    return r;
}

std::map<std::pair<double, double>, Run>& runs()
{
    static std::map<std::pair<double, double>, Run> m;
    return m;
}

const Run& run_for(double eps, double tau, std::size_t N)
{
    auto key = std::make_pair(eps, tau);
    auto it = runs().find(key);
    if (it == runs().end())
        it = runs().emplace(key, trajectory(eps, tau, N)).first;
    return it->second;
}

// 1. Unperturbed closed form through the command line.
Verdict criterion1()
{
    Clock clock;
    fs::path dir = fs::temp_directory_path() / "tfjko_acceptance";
    fs::create_directories(dir);
    std::string out = (dir / "profile.csv").string();
    std::ostringstream so, se;
    int code = cli::main_entry(
        {"stationary", "--eps", "0", "--lambda", "1", "--m", "2048", "--h", "zero", "--out", out}, so, se);
    double secs = clock.seconds();
    if (code != 0)
        return {false, "exit " + std::to_string(code) + ": " + se.str()};
    auto meta = read_numeric_csv((dir / "profile.meta.csv").string(),
                                 {"x_star", "C_eps", "c1", "c2", "lambda_tilde", "rho0", "M", "lambda", "eps",
                                  "el_residual", "mass_error"});
    auto rho = read_density(out);
    const double x0 = std::pow(22.5, 0.2);
    double linf = 0.0;
    for (std::size_t j = 0; j < rho.size(); ++j)
        linf = std::max(linf, std::abs(rho.vals()[j] - sh_value(x0, rho.xs()[j])));
    double xerr = std::abs(meta[0][0] - x0), merr = std::abs(rho.mass() - 1.0);
    fs::remove_all(dir);
    bool ok = linf < 1e-8 && xerr < 1e-10 && merr < 1e-10 && rho.size() == 2048 && secs < 1.0;
    return {ok, "Linf " + num(linf) + ", x* error " + num(xerr) + ", mass error " + num(merr) + ", " + num(secs, 3) +
                    " s"};
}

// 2. Perturbed equilibrium structure.
Verdict criterion2()
{
    Clock clock;
    auto sh = smyth_hill(1.0, 2048);
    double el = 0.0, cid = 0.0;
    std::vector<double> lx, ly;
    for (double eps : eps_sweep) {
        const auto& st = profile(eps);
        el = std::max(el, st.diag.el_residual);
        cid = std::max(cid, st.diag.c_identity_residual);
        double gap = 0.0;
        for (double x : linspace(-1.05 * st.x_star, 1.05 * st.x_star, 4001))
            gap = std::max(gap, std::abs(st.profile(x) - sh.profile(x)));
        lx.push_back(std::log(eps));
        ly.push_back(std::log(gap));
    }
    auto f = fit_affine(lx, ly);
    double secs = clock.seconds();
    bool ok = el < 1e-8 && cid < 1e-8 && std::abs(f.slope - 1.0) <= 0.1 && secs < 10.0;
    return {ok, "E-L residual " + num(el) + ", C identity residual " + num(cid) + ", gap exponent " +
                    num(f.slope, 6) + ", " + num(secs, 3) + " s"};
}

// 3. Curvature deviations scale with eps.
Verdict criterion3()
{
    const double lt0 = std::sqrt(1.0 / 6.0);
    std::vector<double> K, M;
    for (double eps : eps_sweep) {
        auto b = sqrt_profile_curvature_bounds(profile(eps));
        K.push_back(std::max(std::abs(b.min_neg_d2 - lt0), std::abs(b.max_neg_d2 - lt0)) / eps);
        M.push_back(b.max_abs_d3 / eps);
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < K.size(); ++i) {
        worst = std::max(worst, std::abs(K[i] / K[i - 1] - 1.0));
        worst = std::max(worst, std::abs(M[i] / M[i - 1] - 1.0));
    }
    bool ok = worst <= 0.25 && std::isfinite(K.back()) && std::isfinite(M.back());
    return {ok, "K_emp " + num(K[0]) + "/" + num(K[1]) + "/" + num(K[2]) + ", M_emp " + num(M[0]) + "/" + num(M[1]) +
                    "/" + num(M[2]) + ", worst change " + num(worst, 3)};
}

// 4. Convexity and regularity of the potential.
Verdict criterion4()
{
    double worst_ratio = INFINITY, c1_jump = 0.0, c2_jump = 0.0;
    for (double eps : {0.0, 1e-4, 2e-4, 4e-4}) {
        const auto& st = profile(eps);
        auto W = build_potential(st);
        const double xs = W.x_star();
        for (double x : linspace(-3.0 * xs, 3.0 * xs, 60001))
            worst_ratio = std::min(worst_ratio, W.eval(x)[2] / st.lambda_tilde);
        const double d = 1e-9 * xs;
        for (double s : {-1.0, 1.0}) {
            double in = W.eval(s * (xs - d))[1], out = W.eval(s * (xs + d))[1];
            c1_jump = std::max(c1_jump, std::abs(in - out) - st.c2 * 2.0 * d);
        }
        c2_jump = std::max(c2_jump, std::abs(st.diag.c2_interior - st.c2));
    }
    c1_jump = std::max(c1_jump, 0.0);
    bool ok = worst_ratio >= 0.95 && c1_jump < 1e-9 && c2_jump < 5e-3;
    return {ok, "min W''/lambda_tilde " + num(worst_ratio, 6) + ", C1 jump " + num(c1_jump) + ", C2 jump " +
                    num(c2_jump)};
}

// 5. One-dimensional transport.
Verdict criterion5()
{
    Clock clock;
    auto gauss = [](double sigma) {
        return density_from_function(-9.0 * sigma, 9.0 * sigma, 4001, [&](double x) {
            double y = x / sigma;
            return std::exp(-0.5 * y * y);
        });
    };
    double w2 = w2_distance(gauss(1.0), gauss(2.0));
    auto rep = verify_wderiv(20, 20240601);
    double secs = clock.seconds();
    bool ok = std::abs(w2 - 1.0) < 1e-4 && rep.pass && rep.cases.size() == 20 && secs < 5.0;
    return {ok, "W2^2 " + num(w2, 10) + ", derivative max relative error " + num(rep.max_rel_error) + ", " +
                    num(secs, 3) + " s"};
}

// 6. Unperturbed rate at two resolutions.
Verdict criterion6()
{
    const Run& a = run_for(0.0, 1e-3, 256);
    const Run& b = run_for(0.0, 2.5e-4, 512);
    double secs = a.seconds + b.seconds;
    bool ok = a.fit.rate >= 1.7 && a.fit.rate <= 2.3 && b.fit.rate >= 1.85 && b.fit.rate <= 2.15 && secs < 120.0;
    return {ok, "rate " + num(a.fit.rate, 6) + " (r2 " + num(a.fit.r2, 6) + ") at tau 1e-3 N 256, " +
                    num(b.fit.rate, 6) + " (r2 " + num(b.fit.r2, 6) + ") at tau 2.5e-4 N 512, " + num(secs, 3) +
                    " s"};
}

// 7. Rate law across the perturbation sweep.
Verdict criterion7()
{
    std::vector<double> e{0.0, 1e-4, 2e-4, 4e-4}, r;
    for (double eps : e)
        r.push_back(run_for(eps, 1e-3, 256).fit.rate);
    bool decreasing = true;
    for (std::size_t i = 1; i < r.size(); ++i)
        decreasing = decreasing && r[i] < r[i - 1];
    auto f = fit_affine(e, r);
    double C = -f.slope;
    bool ok = decreasing && f.r2 > 0.9 && C > 0.0;
    std::string rates;
    for (double v : r)
        rates += (rates.empty() ? "" : "/") + num(v, 11);
    return {ok, "rates " + rates + ", r2 " + num(f.r2, 6) + ", C_emp " + num(C)};
}

// 8. Step-level estimates on every trajectory of 6 and 7.
Verdict criterion8()
{
    std::size_t steps = 0, energy_fail = 0, holder_fail = 0, env_fail = 0, pairs = 0;
    bool monotone = true, positive = true;
    double rate_min = INFINITY, holder_worst = 0.0;
    for (const auto& kv : runs()) {
        const Run& r = kv.second;
        for (const auto& s : r.trace.steps)
            energy_fail += s.energy_estimate ? 0 : 1;
        steps += r.trace.steps.size();
        auto h = holder_check(r.trace, 50, 7);
        pairs += h.pairs;
        holder_fail += h.violations;
        holder_worst = std::max(holder_worst, h.worst_ratio);
        auto d = step_decay_check(r.trace);
        env_fail += d.envelope_violations;
        monotone = monotone && d.monotone;
        positive = positive && !d.vacuous && d.rate_emp > 0.0;
        rate_min = std::min(rate_min, d.rate_emp);
    }
    bool ok = runs().size() == 5 && energy_fail == 0 && holder_fail == 0 && env_fail == 0 && monotone && positive;
    return {ok, std::to_string(steps) + " steps: energy estimate failures " + std::to_string(energy_fail) +
                    ", Holder violations " + std::to_string(holder_fail) + "/" + std::to_string(pairs) +
                    " (worst ratio " + num(holder_worst, 3) + "), envelope violations " + std::to_string(env_fail) +
                    ", min rate_emp " + num(rate_min)};
}

// 9. Entropy dissipation on generated densities, kappa stability.
Verdict criterion9()
{
    std::size_t violations = 0;
    double ratio_min = INFINITY;
    for (double eps : {0.0, 1e-4}) {
        auto W = build_potential(profile(eps));
        auto rep = inequality_report(generate_test_densities(W, 200, 20240601), W, h1_params(eps));
        violations += rep.dissipation_violations;
        ratio_min = std::min(ratio_min, rep.dissipation_ratio_min);
    }
    auto W = build_potential(profile(1e-4));
    auto k = kappa_stability_check(W, h1_params(1e-4), 200, 20240601);
    bool finite = std::isfinite(k.doubled.kappa1) && std::isfinite(k.doubled.kappa2) && std::isfinite(k.doubled.kappa3);
    bool ok = violations == 0 && finite && k.stable;
    return {ok, "dissipation violations " + std::to_string(violations) + ", min ratio " + num(ratio_min, 8) +
                    ", kappa " + num(k.doubled.kappa1) + "/" + num(k.doubled.kappa2) + "/" + num(k.doubled.kappa3) +
                    ", change under doubling " + num(k.max_relative_change, 3)};
}

// 10. Splitting identity under refinement.
Verdict criterion10()
{
    double worst = 0.0;
    bool ok = true;
    for (double eps : {1e-4, 4e-4}) {
        auto rep = verify_splitting(build_potential(profile(eps)), h1_params(eps), 200, 3);
        worst = std::max(worst, rep.worst_factor);
        ok = ok && rep.pass;
    }
    return {ok, "worst reduction factor per halving " + num(worst, 4)};
}

// 11. Squared L1 distance against the Lyapunov gap on the run of 6.
Verdict criterion11()
{
    const Run& r = run_for(0.0, 1e-3, 256);
    std::vector<double> t, lr;
    double lo = INFINITY, hi = 0.0;
    for (const auto& row : r.trace.rows) {
        double gap = row.L - r.trace.L_bar;
        if (row.t < 0.5 - 1e-12 || row.t > 3.0 + 1e-12 || gap <= gap_noise_floor)
            continue;
        double ratio = row.l1_to_eq * row.l1_to_eq / gap;
        t.push_back(row.t);
        lr.push_back(std::log(ratio));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    if (t.size() < 3)
        return {false, "fewer than three rows above the noise floor"};
    auto f = fit_affine(t, lr);
    bool ok = std::isfinite(hi) && std::abs(f.slope) <= 0.1;
    return {ok, "C1_emp " + num(hi) + " (min " + num(lo) + "), log-ratio slope " + num(f.slope, 4) + " over " +
                    std::to_string(t.size()) + " rows"};
}

} // namespace

int main()
{
    warning_sink() = [](const std::string& m) { std::fprintf(stderr, "warning: %s\n", m.c_str()); };
    const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3,  criterion4,
                                                         criterion5, criterion6, criterion7,  criterion8,
                                                         criterion9, criterion10, criterion11};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i]();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("criterion %zu: %s  %s\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
