// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include <tfjko/ot1d.hpp>

using namespace tfjko;

namespace
{

GridDensity gaussian(double sigma, double shift = 0.0, std::size_t M = 4001)
{
    double a = shift - 9.0 * sigma, b = shift + 9.0 * sigma;
    return density_from_function(a, b, M, [&](double x) {
        double y = (x - shift) / sigma;
        return std::exp(-0.5 * y * y);
    });
}

GridDensity bump(double c, double w, std::size_t M = 801)
{
    return density_from_function(c - w, c + w, M, [&](double x) {
        double y = (x - c) / w;
        return std::max(0.0, 1.0 - y * y);
    });
}

} // namespace

TEST(W2, GaussianScalingMatchesClosedForm)
{
    // W2^2 between centred normals is (sigma1 - sigma2)^2
    EXPECT_NEAR(w2_distance(gaussian(1.0), gaussian(2.0)), 1.0, 1e-4);
}

TEST(W2, TranslationGivesSquaredShift)
{
    auto a = bump(0.0, 1.0), b = bump(0.7, 1.0);
    EXPECT_NEAR(w2_distance(a, b), 0.49, 1e-12);
    EXPECT_NEAR(w2_distance(a, a), 0.0, 1e-15);
}

TEST(W2, ParticleFormIsMeanSquaredGap)
{
    QuantilePoints a({0.0, 1.0, 2.0}), b({0.5, 1.0, 3.0});
    EXPECT_NEAR(w2_distance(a, b), (0.25 + 0.0 + 1.0) / 3.0, 1e-15);
    EXPECT_THROW(w2_distance(a, QuantilePoints({0.0, 1.0})), InputError);
}

TEST(W2, ParticlesAgreeWithGridForm)
{
    auto a = bump(0.0, 1.0, 2001), b = bump(0.3, 1.6, 2001);
    auto qa = to_quantiles(a, 2000), qb = to_quantiles(b, 2000);
    EXPECT_NEAR(w2_distance(qa, qb), w2_distance(a, b), 1e-5);
}

TEST(OptimalMap, PushesSourceOntoTarget)
{
    auto a = bump(0.0, 1.0), b = bump(1.0, 2.0);
    auto plan = optimal_map(a, b);
    EXPECT_LT(plan.pushforward_error, tol_ot);
    // affine case: T(x) = 1 + 2x
    for (std::size_t i = 0; i < plan.xs.size(); ++i)
        EXPECT_NEAR(plan.T[i], 1.0 + 2.0 * plan.xs[i], 1e-9);
    for (std::size_t i = 1; i < plan.T.size(); ++i)
        EXPECT_GE(plan.T[i], plan.T[i - 1]);
}

TEST(Perturbation, SupportAndPrimitive)
{
    SignedGrid eta{{-0.5, 0.0, 0.5}, {0.0, 1.0, 0.0}};
    auto s = support_of(eta);
    EXPECT_DOUBLE_EQ(s.a, -0.5);
    EXPECT_DOUBLE_EQ(s.b, 0.5);
    EXPECT_NEAR(eta_primitive(eta, 0.0), 0.25, 1e-15);
    EXPECT_NEAR(eta_primitive(eta, 1.0), 0.5, 1e-15);
}

TEST(Perturbation, RejectsNonzeroIntegralAndVacuum)
{
    auto rho = bump(0.0, 1.0);
    SignedGrid pos{{-0.5, 0.0, 0.5}, {0.0, 1.0, 0.0}};
    EXPECT_THROW(check_perturbation(rho, pos), InputError);
    SignedGrid edge{{-1.2, -1.1, -1.0, -0.9}, {0.0, 1.0, -1.0, 0.0}};
    EXPECT_THROW(check_perturbation(rho, edge), InputError);
}

TEST(Perturbation, DerivativeMatchesFiniteDifference)
{
    auto rho = bump(0.0, 1.0, 801), rho_hat = bump(0.4, 1.3, 801);
    // odd, zero-mean perturbation on a subset of rho's nodes
    SignedGrid eta{linspace(-0.6, 0.6, 121), {}};
    for (double x : eta.xs)
        eta.vals.push_back(std::sin(M_PI * x / 0.6) * (0.36 - x * x));
    double d = w2_perturbation_derivative(rho, rho_hat, eta);

    auto shifted = [&](double s) {
        auto xs = merged_nodes(rho.xs(), eta.xs);
        std::vector<double> v;
        for (double x : xs)
            v.push_back(rho(x) + s * eta(x));
        return GridDensity(xs, v);
    };
    const double h = 1e-3;
    double fd = (-w2_distance(shifted(2 * h), rho_hat) + 8 * w2_distance(shifted(h), rho_hat) -
                 8 * w2_distance(shifted(-h), rho_hat) + w2_distance(shifted(-2 * h), rho_hat)) /
                (12 * h);
    EXPECT_NEAR(d, fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(Perturbation, QuantileVelocityMatchesFiniteDifference)
{
    auto rho = bump(0.0, 1.0, 801);
    SignedGrid eta{linspace(-0.6, 0.6, 121), {}};
    for (double x : eta.xs)
        eta.vals.push_back(std::sin(M_PI * x / 0.6) * (0.36 - x * x));
    auto xs = merged_nodes(rho.xs(), eta.xs);
    auto at = [&](double s) {
        std::vector<double> v;
        for (double x : xs)
            v.push_back(rho(x) + s * eta(x));
        return GridDensity(xs, v);
    };
    const double h = 1e-5, xi = 0.4;
    auto rp = at(h), rm = at(-h);
    double fd = (QuantileFunction(rp)(xi) - QuantileFunction(rm)(xi)) / (2 * h);
    EXPECT_NEAR(quantile_velocity(rho, eta, xi), fd, 1e-5);
}
