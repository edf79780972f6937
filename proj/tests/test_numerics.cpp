#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "frachaos/acceptance.hpp"
#include "frachaos/fbm.hpp"
#include "frachaos/fraccalc.hpp"
#include "frachaos/grid.hpp"
#include "frachaos/lambda_space.hpp"
#include "frachaos/permanent.hpp"
#include "frachaos/rng.hpp"

using namespace frachaos;

namespace {

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

}  // namespace

// ---- grid

TEST(Grid, UniformNodes) {
    const auto g = make_grid(1.0, 8);
    ASSERT_EQ(g.size(), 9u);
    for (std::size_t k = 0; k <= 8; ++k) EXPECT_DOUBLE_EQ(g.node(k), 0.125 * double(k));
    EXPECT_DOUBLE_EQ(make_grid(2.0, 16).spacing(), 0.125);
}

TEST(Grid, RejectsBadSizes) {
    EXPECT_THROW(make_grid(1.0, 7), InvalidArgument);
    EXPECT_THROW(make_grid(0.0, 8), InvalidArgument);
}

TEST(Grid, SingularWeightClosedForms) {
    const auto g = make_grid(1.0, 512);
    const double a = 0.3, x = 0.25;
    const auto one = SampledFunction::from(g, [](double) { return 1.0; });
    EXPECT_LT(rel(singular_weight_integral(one, x, a), std::pow(1.0 - x, a) / a), 1e-10);
    const auto lin = SampledFunction::from(g, [&](double u) { return u - x; });
    EXPECT_LT(rel(singular_weight_integral(lin, x, a), std::pow(1.0 - x, 1 + a) / (1 + a)), 1e-10);
}

TEST(Grid, SingularWeightCubicMatchesExpansion) {
    // f(u) = Σ c_k (u - x)^k integrates to Σ c_k (T - x)^{k+a} / (k + a).
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1, 1);
    const double a = 0.3, x = 0.25;
    const double c[4] = {U(rng), U(rng), U(rng), U(rng)};
    const auto g = make_grid(1.0, 1024);
    const auto f = SampledFunction::from(g, [&](double u) {
        const double d = u - x;
        return c[0] + d * (c[1] + d * (c[2] + d * c[3]));
    });
    double ref = 0;
    for (int k = 0; k < 4; ++k) ref += c[k] * std::pow(1.0 - x, k + a) / (k + a);
    EXPECT_LT(rel(singular_weight_integral(f, x, a), ref), 1e-4);
}

TEST(Grid, SingularWeightTendsToTrapezoid) {
    const auto g = make_grid(1.0, 256);
    const auto f = SampledFunction::from(g, [](double u) { return std::sin(3 * u) + 2; });
    const double x = g.node(64);
    double tail = 0;
    for (std::size_t k = 64; k < 256; ++k) tail += 0.5 * g.spacing() * (f[k] + f[k + 1]);
    const double d1 = std::abs(singular_weight_integral(f, x, 0.999) - tail);
    const double d2 = std::abs(singular_weight_integral(f, x, 0.9999) - tail);
    EXPECT_LT(d2, d1);
    EXPECT_LT(d2, 1e-3);
}

TEST(Grid, LpNorm) {
    const auto g = make_grid(1.0, 1024);
    EXPECT_NEAR(l_p_norm(SampledFunction::from(g, [](double) { return -2.5; }), 3.0), 2.5, 1e-12);
    EXPECT_NEAR(l_p_norm(SampledFunction::from(g, [](double u) { return u; }), 2.0), 1 / std::sqrt(3.0), 1e-4);
}

TEST(Grid, LpNormTriangleInequality) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> Z;
    const auto g = make_grid(1.0, 128);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(g.size()), y(g.size());
        for (auto& v : x) v = Z(rng);
        for (auto& v : y) v = Z(rng);
        const SampledFunction f(g, x), h(g, y);
        for (double p : {1.0, 2.0, 4.0}) EXPECT_LE(l_p_norm(f + h, p), l_p_norm(f, p) + l_p_norm(h, p) + 1e-12);
    }
}

// ---- fractional calculus

TEST(FracCalc, ConstantAndPowerRule) {
    const auto g = make_grid(1.0, 1024);
    const auto o = FracOrder::from_hurst(0.3);
    const double a = o.alpha();
    const auto I1 = frac_integral(SampledFunction::from(g, [](double) { return 1.0; }), o);
    const double beta = 1.5;
    const auto Ip = frac_integral(SampledFunction::from(g, [&](double u) { return std::pow(1 - u, beta); }), o);
    for (std::size_t k = 0; k < g.n_cells(); k += 37) {
        const double x = g.node(k);
        EXPECT_LT(rel(I1[k], std::pow(1 - x, a) / std::tgamma(a + 1)), 1e-10);
        const double ref = std::tgamma(beta + 1) / std::tgamma(a + beta + 1) * std::pow(1 - x, a + beta);
        EXPECT_LT(rel(Ip[k], ref), 1e-3) << x;
    }
}

TEST(FracCalc, IntegralIsLinear) {
    const auto g = make_grid(1.0, 256);
    const auto o = FracOrder::from_hurst(0.2);
    const auto f = SampledFunction::from(g, [](double u) { return std::cos(4 * u); });
    const auto h = SampledFunction::from(g, [](double u) { return u * u; });
    const auto lhs = frac_integral(f * 2.0 + h * -3.0, o);
    const auto I = frac_integral(f, o), J = frac_integral(h, o);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(lhs[k], 2 * I[k] - 3 * J[k], 1e-12);
}

TEST(FracCalc, DerivativeClosedForms) {
    const auto g = make_grid(1.0, 2048);
    const auto o = FracOrder::from_hurst(0.25);
    const double a = o.alpha();
    const auto Dc = frac_derivative(SampledFunction::from(g, [](double) { return 2.0; }), o);
    const auto Dp = frac_derivative(SampledFunction::from(g, [&](double u) { return std::pow(1 - u, a); }), o);
    for (std::size_t k = 0; k + 8 < g.size(); k += 97) {
        const double s = g.node(k);
        EXPECT_LT(rel(Dc.values[k], 2.0 / (std::tgamma(1 - a) * std::pow(1 - s, a))), 1e-8) << s;
        EXPECT_LT(rel(Dp.values[k], std::tgamma(a + 1)), 1e-3) << s;
    }
}

TEST(FracCalc, DerivativeInvertsIntegral) {
    const auto g = make_grid(1.0, 2048);
    std::mt19937_64 rng(3);
    for (double H : {0.1, 0.3}) {
        const auto o = FracOrder::from_hurst(H);
        const auto phi = acceptance::random_smooth(g, rng);
        const auto back = frac_derivative(frac_integral(phi, o), o).values;
        EXPECT_LT(l_p_norm(back - phi, 2.0) / l_p_norm(phi, 2.0), 1e-2) << H;
    }
}

TEST(FracCalc, MarchaudTail) {
    const auto g = make_grid(1.0, 1024);
    const auto o = FracOrder::from_hurst(0.25);
    EXPECT_TRUE(marchaud_tail_convergence(SampledFunction::from(g, [](double u) { return u; }), o, 2.5).converges);
    const auto zero = marchaud_tail_convergence(SampledFunction::from(g, [](double) { return 0.0; }), o, 2.5);
    EXPECT_TRUE(zero.converges);
    for (double d : zero.lp_increments) EXPECT_EQ(d, 0.0);
    const auto jump = SampledFunction::from(g, [](double u) { return u <= 0.5 ? 1.0 : 0.0; });
    EXPECT_FALSE(marchaud_tail_convergence(jump, FracOrder(0.4), 4.0).converges);
}

TEST(FracCalc, TailKernelInequality) {
    for (auto [s, t, r, a] : {std::tuple{0.2, 0.5, 0.9, 0.3}, std::tuple{0.1, 0.2, 0.21, 0.45}}) {
        const auto sides = tail_kernel_inequality(s, t, r, FracOrder(a));
        EXPECT_GT(sides.lhs, 0.0);
        EXPECT_LE(sides.lhs, sides.rhs);
    }
    // s -> t: the right side blows up like (t - s)^{-α}.
    double prev = 0;
    for (double gap : {1e-2, 1e-4, 1e-6, 1e-8}) {
        const double rhs = tail_kernel_inequality(0.5 - gap, 0.5, 0.9, FracOrder(0.3)).rhs;
        EXPECT_GT(rhs, 3 * prev);
        prev = rhs;
    }
}

TEST(FracCalc, TailKernelInequalityRandom) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(0.01, 0.99);
    for (int rep = 0; rep < 200; ++rep) {
        double v[3] = {U(rng), U(rng), U(rng)};
        std::sort(v, v + 3);
        if (v[1] - v[0] < 1e-3 || v[2] - v[1] < 1e-3) continue;
        const auto sides = tail_kernel_inequality(v[0], v[1], v[2], FracOrder(0.05 + 0.4 * U(rng)));
        EXPECT_LE(sides.lhs, sides.rhs * (1 + 1e-9));
    }
}

// ---- lambda space

TEST(Lambda, SpaceConstant) {
    for (double H : {0.1, 0.25, 0.4}) {
        const auto K = space_constants(FracOrder::from_hurst(H));
        const double ref = 2 * H * std::pow(std::tgamma(H + 0.5), 2) /
                           ((1 - 2 * H) * std::beta(1 - 2 * H, H + 0.5));
        EXPECT_NEAR(K.c_h, ref, 1e-12 * ref);
    }
}

TEST(Lambda, PowerPhiClosedForm) {
    const auto g = make_grid(1.0, 1024);
    const auto o = FracOrder::from_hurst(0.25);
    const double a = o.alpha(), c = 1.7;
    const auto e = from_phi(SampledFunction::from(g, [&](double s) { return c * std::pow(s, a); }), o);
    for (std::size_t k = 1; k < g.n_cells(); k += 51) {
        const double u = g.node(k);
        EXPECT_LT(rel(e.f[k], c * std::pow(u, a) * std::pow(1 - u, a) / std::tgamma(a + 1)), 2e-3) << u;
    }
    const auto zero = from_phi(SampledFunction::from(g, [](double) { return 0.0; }), o);
    for (double v : zero.f.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lambda, RoundTrip) {
    const auto g = make_grid(1.0, 2048);
    const auto o = FracOrder::from_hurst(0.3);
    std::mt19937_64 rng(21);
    const auto phi = acceptance::random_smooth(g, rng);
    const auto back = to_phi(from_phi(phi, o).f, o).phi;
    EXPECT_LT(l_p_norm(back - phi, 2.0) / l_p_norm(phi, 2.0), 1e-2);

    const double a = o.alpha();
    const auto f = SampledFunction::from(g, [&](double u) { return std::pow(u, a) * std::pow(1 - u, a) / std::tgamma(a + 1); });
    const auto pw = to_phi(f, o).phi;
    const auto ref = SampledFunction::from(g, [&](double s) { return std::pow(s, a); });
    EXPECT_LT(l_p_norm(pw - ref, 2.0) / l_p_norm(ref, 2.0), 1e-2);
}

TEST(Lambda, IndicatorIsometry) {
    const auto g = make_grid(1.0, 4096);
    for (double H : {0.1, 0.35}) {
        const auto o = FracOrder::from_hurst(H);
        const double ts[] = {0.25, 0.5, 0.8125, 1.0};
        std::vector<LambdaElement> e;
        for (double t : ts) e.push_back(indicator_element(g, o, t));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j)
                EXPECT_LT(rel(inner(e[i], e[j]), covariance(H, ts[i], ts[j])), 1e-3) << H << ' ' << ts[i] << ' ' << ts[j];
    }
}

TEST(Lambda, InnerIsBilinearAndSymmetric) {
    const auto g = make_grid(1.0, 512);
    const auto o = FracOrder::from_hurst(0.2);
    std::mt19937_64 rng(4);
    const auto x = from_phi(acceptance::random_smooth(g, rng), o);
    const auto y = from_phi(acceptance::random_smooth(g, rng), o);
    const auto z = restrict(from_phi(acceptance::random_smooth(g, rng), o), 0.5);
    EXPECT_NEAR(inner(x, y), inner(y, x), 1e-12 * (1 + std::abs(inner(x, y))));
    const double lhs = inner(combine(2.0, x, -0.5, y), z);
    EXPECT_NEAR(lhs, 2 * inner(x, z) - 0.5 * inner(y, z), 1e-9 * (1 + std::abs(lhs)));
    EXPECT_GE(inner(z, z), 0.0);
}

TEST(Lambda, Restrict) {
    const auto g = make_grid(1.0, 1024);
    const auto o = FracOrder::from_hurst(0.25);
    const auto sigma = constant_element(g, o, 0.7);
    const auto full = restrict(sigma, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(full.phi[k], sigma.phi[k]);
    const auto none = restrict(sigma, 0.0);
    for (double v : none.phi.values()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(restrict(sigma, 0.3), InvalidArgument);

    const auto half = restrict(sigma, 0.5);
    for (std::size_t k = 8; k + 8 < g.size(); k += 13) {
        if (std::abs(g.node(k) - 0.5) < 8 * g.spacing()) continue;
        EXPECT_NEAR(half.f[k], g.node(k) <= 0.5 ? 0.7 : 0.0, 1e-2) << g.node(k);
    }
}

TEST(Lambda, RestrictionConstant) {
    const auto o = FracOrder(0.25);
    const double c = restriction_constant(o, 2.0, 3.5, 1.0, default_operator_norm(o, 3.5));
    EXPECT_TRUE(std::isfinite(c));
    EXPECT_GT(c, 0.0);
    EXPECT_THROW(restriction_constant(o, 3.5, 3.5, 1.0, 1.0), InvalidArgument);
    // Both summands vanish as t -> 0 (the first like t^{(p-p')/(p' p)}).
    double prev = c;
    for (double t : {1e-2, 1e-4, 1e-8, 1e-16}) {
        const double v = restriction_constant(o, 2.0, 3.5, t, default_operator_norm(o, 3.5));
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_LT(prev, 2e-3 * c);
}

TEST(Lambda, HolderProduct) {
    const auto g = make_grid(1.0, 2048);
    const auto o = FracOrder::from_hurst(0.25);
    std::mt19937_64 rng(8);
    const auto e = from_phi(acceptance::random_smooth(g, rng), o);
    const auto same = holder_product(SampledFunction::from(g, [](double) { return 1.0; }), 1.0, e);
    EXPECT_LT(std::abs(norm(same) - norm(e)) / norm(e), 1e-2);
    const auto zero = holder_product(SampledFunction::from(g, [](double) { return 0.0; }), 1.0, e);
    EXPECT_LT(norm(zero), 1e-12);
    const auto lin = holder_product(SampledFunction::from(g, [](double u) { return u; }), 1.0, indicator_element(g, o, 1.0));
    ASSERT_TRUE(lin.membership.has_value());
    EXPECT_TRUE(lin.membership->converges);
}

// ---- fBm

TEST(Fbm, PhiloxKnownAnswer) {
    const Philox4x32 gen(0);
    const auto out = gen({0, 0, 0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Fbm, Covariance) {
    EXPECT_DOUBLE_EQ(covariance(0.3, 0.7, 0.7), std::pow(0.7, 0.6));
    EXPECT_EQ(covariance(0.3, 0.7, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(covariance(0.2, 0.3, 0.9), covariance(0.2, 0.9, 0.3));
}

TEST(Fbm, FactorReproducesCovariance) {
    const auto g = make_grid(1.0, 64);
    const FbmSampler s(0.2, g);
    const Eigen::MatrixXd LL = (*s.factor()) * s.factor()->transpose();
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(LL(i, j), covariance(0.2, g.node(i + 1), g.node(j + 1)), 1e-10);
}

TEST(Fbm, SamplingIsReproducibleAndExact) {
    const auto g = make_grid(1.0, 64);
    const FbmSampler s(0.2, g);
    const auto a = simulate(s, 10000, 99), b = simulate(s, 3, 99);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(a.paths[2].values[k], b.paths[2].values[k]);
    const std::size_t i3 = g.floor_index(0.3), i7 = g.floor_index(0.7);
    double v1 = 0, c37 = 0, v1sq = 0, c37sq = 0;
    for (const auto& p : a.paths) {
        EXPECT_EQ(p.values[0], 0.0);
        const double x = p.values[64] * p.values[64], y = p.values[i3] * p.values[i7];
        v1 += x, v1sq += x * x, c37 += y, c37sq += y * y;
    }
    const double n = 10000;
    v1 /= n, c37 /= n;
    EXPECT_LT(std::abs(v1 - 1.0), 3 * std::sqrt((v1sq / n - v1 * v1) / n));
    EXPECT_LT(std::abs(c37 - covariance(0.2, g.node(i3), g.node(i7))), 3 * std::sqrt((c37sq / n - c37 * c37) / n));
}

TEST(Fbm, WienerIntegral) {
    const auto g = make_grid(1.0, 256);
    const auto o = FracOrder::from_hurst(0.3);
    const FbmSampler s(0.3, g);
    const auto p = s.sample(5, 0);
    EXPECT_NEAR(wiener_integral(p, indicator_element(g, o, 0.5)), p.values[128], 1e-12);
    EXPECT_EQ(wiener_integral(p, zero_element(g, o)), 0.0);

    std::mt19937_64 rng(2);
    const auto e = from_phi(acceptance::random_smooth(g, rng), o);
    const auto batch = simulate(s, 10000, 7);
    double m2 = 0;
    for (const auto& q : batch.paths) m2 += std::pow(wiener_integral(q, e), 2);
    EXPECT_LT(rel(m2 / 10000, inner(e, e)), 0.05);
}

TEST(Fbm, Hermite) {
    EXPECT_EQ(hermite(0, 1.3), 1.0);
    EXPECT_EQ(hermite(1, 1.3), 1.3);
    EXPECT_NEAR(hermite(2, 1.3), (1.3 * 1.3 - 1) / 2, 1e-15);
    EXPECT_THROW(hermite(65, 0.0), InvalidArgument);
    for (double a : {-1.0, -0.4, 0.3, 1.0})
        for (double x : {-3.0, -1.0, 0.5, 3.0}) {
            double s = 0;
            for (int m = 0; m <= 40; ++m) s += std::pow(a, m) * hermite(m, x);
            EXPECT_NEAR(s, std::exp(a * x - a * a / 2), 1e-10 * std::exp(a * x - a * a / 2));
        }
}

TEST(Fbm, MultipleIntegrals) {
    const auto g = make_grid(1.0, 256);
    const auto o = FracOrder::from_hurst(0.25);
    const FbmSampler s(0.25, g);
    std::mt19937_64 rng(6);
    const auto h = from_phi(acceptance::random_smooth(g, rng), o);
    const auto k = from_phi(acceptance::random_smooth(g, rng), o);
    const double hh = inner(h, h), hk = inner(h, k);
    const auto p = s.sample(1, 4);
    const double Bh = wiener_integral(p, h), Bk = wiener_integral(p, k);
    EXPECT_NEAR(multiple_integral_power(p, h, 1), Bh, 1e-12);
    EXPECT_NEAR(multiple_integral_power(p, h, 2), Bh * Bh - hh, 1e-10);
    EXPECT_NEAR(multiple_integral_sym(p, {h, k}), Bh * Bk - hk, 1e-10);
    EXPECT_NEAR(multiple_integral_sym(p, {h, h, h}), multiple_integral_power(p, h, 3), 1e-10);
    EXPECT_EQ(multiple_integral_sym(p, {h, zero_element(g, o), k}), 0.0);

    // E[I_3²] has a relative standard error near 10% at 10^4 paths; 10^5 make 10% a 3σ band.
    const std::size_t n = 100000;
    std::vector<double> I(n);
    parallel_for(n, [&](std::size_t i) { I[i] = multiple_integral_power(s.sample(13, i), h, 3, hh); });
    double m1 = 0, m2 = 0;
    for (double v : I) m1 += v, m2 += v * v;
    m1 /= n, m2 /= n;
    EXPECT_LT(std::abs(m1), 3 * std::sqrt(m2 / n));
    EXPECT_LT(rel(m2, 6 * std::pow(hh, 3)), 0.1);
}

// ---- permanent

TEST(Permanent, SmallCases) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    EXPECT_EQ(permanent(a), 10.0);
    for (int n = 1; n <= 8; ++n) EXPECT_EQ(permanent(Eigen::MatrixXd::Identity(n, n)), 1.0);
    EXPECT_THROW(permanent(Eigen::MatrixXd::Ones(13, 13)), InvalidArgument);
}

TEST(Permanent, MatchesEnumeration) {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> U(-5, 5);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::MatrixXd a(6, 6);
        for (int i = 0; i < 36; ++i) a(i / 6, i % 6) = U(rng);
        EXPECT_EQ(permanent(a), acceptance::naive_permanent(a));
    }
    // Constant matrices: perm(c J_n) = n! c^n.
    EXPECT_DOUBLE_EQ(permanent(Eigen::MatrixXd::Constant(7, 7, 0.5)), 5040.0 * std::pow(0.5, 7));
}
