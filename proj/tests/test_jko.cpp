// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <tfjko/jko.hpp>

using namespace tfjko;

namespace
{

ProblemParams params(double eps, double lambda = 1.0)
{
    ProblemParams p;
    p.lambda = lambda;
    p.eps = eps;
    p.nl = eps > 0.0 ? h1_nonlinearity() : zero_nonlinearity();
    return p;
}

GridDensity quartic(double shift = 0.0, double width = 1.5, std::size_t M = 801)
{
    return density_from_function(shift - width, shift + width, M,
                                 [&](double x) { return quartic_bump((x - shift) / width); });
}

double mean_of(const std::vector<double>& z)
{
    return std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
}

JkoConfig config(std::size_t N, double tau)
{
    JkoConfig c;
    c.N = N;
    c.tau = tau;
    return c;
}

} // namespace

TEST(DiscreteEnergy, GradientMatchesFiniteDifferences)
{
    auto p = params(0.5);
    DiscreteEnergy E(p);
    auto z = to_quantiles(quartic(0.2, 1.3), 64).z();
    std::vector<double> g;
    E.gradient(z, g);
    for (std::size_t i = 0; i < z.size(); i += 7) {
        const double h = 1e-6 * (z[1] - z[0]);
        auto zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        double fd = (E.value(zp) - E.value(zm)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST(DiscreteEnergy, MomentTermMatchesDensity)
{
    auto rho = quartic(0.3);
    auto z = to_quantiles(rho, 256).z();
    double pot = 0.0;
    for (double x : z)
        pot += x * x;
    EXPECT_NEAR(pot / 256.0, second_moment(rho), 1e-3);
}

TEST(DiscreteEnergy, ApproachesContinuumEnergyUnderRefinement)
{
    auto p = params(0.3);
    auto rho = quartic(0.0, 1.5, 8001);
    double ref = energy_E(rho, p);
    DiscreteEnergy E(p);
    // the quadratic vacuum edges limit the order; ask for steady decrease
    double prev = INFINITY;
    for (std::size_t N : {128, 512, 2048}) {
        double e = std::abs(E.value(to_quantiles(rho, N).z()) - ref);
        EXPECT_LT(e, prev / 2.0) << "N = " << N;
        prev = e;
    }
    EXPECT_LT(prev / ref, 1e-3);
}

TEST(JkoStep, CenterOfMassContractsExactly)
{
    // the interaction terms telescope, so the mean obeys m+ (1 + lambda tau) = m_hat
    for (double eps : {0.0, 0.5}) {
        auto p = params(eps, 1.3);
        const double tau = 1e-2;
        auto zh = to_quantiles(quartic(0.7, 1.8), 128);
        auto r = jko_step(zh, p, config(128, tau));
        EXPECT_NEAR(mean_of(r.z_plus.z()), mean_of(zh.z()) / (1.0 + p.lambda * tau), 1e-10);
        EXPECT_LE(r.stats.J_plus, r.stats.J_hat);
    }
}

TEST(JkoStep, PreservesSymmetry)
{
    auto p = params(0.5);
    auto zh = to_quantiles(quartic(0.0, 2.5), 128);
    auto r = jko_step(zh, p, config(128, 1e-2));
    const auto& z = r.z_plus.z();
    for (std::size_t i = 0; i < z.size(); ++i)
        EXPECT_NEAR(z[i], -z[z.size() - 1 - i], 1e-10);
}

TEST(JkoStep, EnergyEstimateAndWeakForm)
{
    auto p = params(0.5);
    const double tau = 5e-3;
    auto zh = to_quantiles(quartic(0.4, 2.0), 128);
    JkoConfig cfg = config(128, tau);
    auto r = jko_step(zh, p, cfg);
    EXPECT_TRUE(r.stats.converged);
    DiscreteEnergy E(p);
    double lhs = E.value(r.z_plus.z()) + w2_distance(r.z_plus, zh) / (2 * tau);
    EXPECT_LE(lhs, E.value(zh.z()) + 1e-12);
    for (std::size_t id = 0; id < mollifier_count; ++id) {
        auto w = weak_residual_check(zh, r.z_plus, p, tau, mollifier(id, 1.5));
        EXPECT_TRUE(w.pass) << "mollifier " << id << ": " << w.residual << " > " << w.bound;
    }
}

TEST(JkoStep, RejectsMismatchedCount)
{
    auto zh = to_quantiles(quartic(), 64);
    EXPECT_THROW(jko_step(zh, params(0.0), config(128, 1e-3)), InputError);
}

TEST(JkoConfig, Validation)
{
    EXPECT_THROW(config(128, -1.0).validate(), InputError);
    EXPECT_THROW(config(128, 0.0).validate(), InputError);
    EXPECT_THROW(config(16, 1e-3).validate(), InputError);
    EXPECT_NO_THROW(config(128, 1e-3).validate());
    EXPECT_NEAR(config(256, 1e-3).tolerance(), 1.6e-9, 1e-18);
}

TEST(DiscreteEquilibrium, IsFixedPointOfTheStep)
{
    for (double eps : {0.0, 0.5}) {
        auto p = params(eps);
        auto W = build_potential(solve_stationary(p));
        auto zeq = discrete_equilibrium(p, 128, W);
        auto r = jko_step(zeq, p, config(128, 1e-2));
        double moved = 0.0;
        for (std::size_t i = 0; i < 128; ++i)
            moved = std::max(moved, std::abs(r.z_plus.z()[i] - zeq.z()[i]));
        EXPECT_LT(moved, 1e-9);
        EXPECT_LT(l1_distance(to_density(zeq), density_from_function(-W.x_star(), W.x_star(), 2001,
                                                                      [&](double x) { return W.rho_bar(x); })),
                  0.05);
    }
}

TEST(DiscreteEquilibrium, TranslatesExactly)
{
    auto p = params(0.0);
    auto W = build_potential(solve_stationary(p));
    auto zeq = discrete_equilibrium(p, 128, W).z();
    const double a = 0.5, tau = 1e-2;
    std::vector<double> zs = zeq;
    for (double& x : zs)
        x += a;
    auto r = jko_step(QuantilePoints(zs), p, config(128, tau));
    const double shift = a / (1.0 + tau);
    for (std::size_t i = 0; i < zs.size(); ++i)
        EXPECT_NEAR(r.z_plus.z()[i], zeq[i] + shift, 1e-9);
}

TEST(Evolve, LyapunovDecreasesAndTraceLayout)
{
    auto p = params(0.5);
    auto W = build_potential(solve_stationary(p));
    JkoConfig cfg = config(64, 1e-2);
    cfg.t_end = 0.25;
    cfg.record_every = 10;
    cfg.keep_states = true;
    auto tr = evolve(quartic(0.6, 2.0), p, cfg, W);
    EXPECT_EQ(tr.steps.size(), 25u);
    EXPECT_EQ(tr.rows.size(), 4u); // t = 0, 0.1, 0.2 and the final step
    EXPECT_NEAR(tr.rows.back().t, 0.25, 1e-12);
    for (const auto& s : tr.steps) {
        EXPECT_TRUE(s.energy_estimate);
        EXPECT_LE(s.L_plus, s.L_hat + 1e-9);
        EXPECT_LE(s.E_plus, s.E_hat);
    }
    EXPECT_EQ(tr.states.size(), tr.rows.size());
    auto hold = holder_check(tr, 20, 3);
    EXPECT_EQ(hold.violations, 0u);

    ProblemParams other = params(0.2);
    EXPECT_THROW(evolve(quartic(), other, cfg, W), InputError);
}

TEST(RateFit, RecoversSyntheticExponential)
{
    std::vector<double> t, gap;
    for (int k = 0; k <= 50; ++k) {
        t.push_back(0.1 * k);
        gap.push_back(3.0 * std::exp(-2.0 * t.back()) + (k > 40 ? -1.0 : 0.0));
    }
    auto f = fit_rate(t, gap, 1.0, 4.0, 1e-8);
    EXPECT_NEAR(f.rate, 2.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_EQ(f.points, 31u);
    EXPECT_THROW(fit_rate(t, gap, 4.5, 6.0, 1e-8), EvaluationError);
    auto a = fit_affine({0.0, 1.0, 2.0}, {1.0, 0.5, 0.0});
    EXPECT_NEAR(a.slope, -0.5, 1e-15);
    EXPECT_NEAR(a.intercept, 1.0, 1e-15);
}

TEST(H2Bound, SmythHillCurvatureIntegralEqualsLambda)
{
    for (double lambda : {0.5, 1.0, 2.0}) {
        auto st = smyth_hill(lambda, 4001);
        EXPECT_NEAR(sobolev_seminorms(st.profile).dxx2, lambda, 2e-2 * lambda);
    }
}

TEST(Mollifier, DerivativesMatchFiniteDifferences)
{
    for (std::size_t id = 0; id < mollifier_count; ++id) {
        auto m = mollifier(id, 1.7);
        for (double x : linspace(m.center - 0.9 * m.radius, m.center + 0.9 * m.radius, 13)) {
            const double h = 1e-5;
            EXPECT_NEAR(m.eval(x)[1], (m.eval(x + h)[0] - m.eval(x - h)[0]) / (2 * h), 1e-6);
            EXPECT_NEAR(m.eval(x)[2], (m.eval(x + h)[1] - m.eval(x - h)[1]) / (2 * h), 1e-5);
            EXPECT_LE(std::abs(m.eval(x)[2]), m.sup_d2() * (1 + 1e-6));
        }
    }
    EXPECT_THROW(mollifier(mollifier_count, 1.0), InputError);
}
