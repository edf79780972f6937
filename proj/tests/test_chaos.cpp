#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "frachaos/acceptance.hpp"
#include "frachaos/chaos.hpp"
#include "frachaos/conditions.hpp"

using namespace frachaos;

namespace {

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

struct Case {
    Grid g;
    FracOrder o;
    SampledFunction zero;
    explicit Case(std::int64_t N, double H = 0.3) : g(make_grid(1.0, N)), o(FracOrder::from_hurst(H)), zero(g, 0.0) {}
    LambdaElement smooth(double w) const {
        return to_phi(SampledFunction::from(g, [w](double u) { return 1.0 + 0.5 * std::cos(w * u); }), o);
    }
};

}  // namespace

// ---- kernels

TEST(Kernels, ZerothKernelCarriesDrift) {
    Case s(256);
    const auto b = constant_element(s.g, s.o, 0.5);
    const auto eta = EtaSpec::deterministic(2.0);
    const auto one = SampledFunction(s.g, 1.0);
    EXPECT_NEAR(mean(build_kernels(s.zero, b, eta, 1.0, 4)), 2.0, 1e-15);
    const auto S = build_kernels(one, b, EtaSpec::deterministic(1.0), 1.0, 4);
    EXPECT_NEAR(mean(S), std::exp(1.0), 1e-12);
    EXPECT_NEAR(kernel_norm_sq(S, 0), std::exp(2.0), 1e-11);
    for (int n = 0; n <= 4; ++n)
        for (const auto& k : S.kernels[n]) EXPECT_EQ(k.b_power + k.eta_level, n);
}

TEST(Kernels, Preconditions) {
    Case s(64);
    const auto b = constant_element(s.g, s.o, 0.5);
    const auto eta = EtaSpec::deterministic(1.0);
    EXPECT_THROW(build_kernels(s.zero, b, eta, 0.3, 4), InvalidArgument);
    EXPECT_THROW(build_kernels(s.zero, b, eta, 1.0, 13), InvalidArgument);
    auto bad = b;
    bad.p_hint = 1.0 / s.o.alpha();
    EXPECT_THROW(build_kernels(s.zero, bad, eta, 1.0, 4), InvalidArgument);
}

TEST(Kernels, RankOneNorms) {
    // b = 0 leaves f̃_n = η̃_n = c h^{⊗n}, whose squared norm is c² ‖h‖^{2n}.
    Case s(256);
    const auto b = constant_element(s.g, s.o, 0.0);
    const auto h = s.smooth(3.0);
    const double hh = inner(h, h);
    for (int n = 1; n <= 8; ++n) {
        EtaSpec eta = EtaSpec::deterministic(0.0);
        eta.add(0.7, std::vector<LambdaElement>(n, h));
        const auto S = build_kernels(s.zero, b, eta, 1.0, n);
        EXPECT_LT(rel(kernel_norm_sq(S, n), 0.49 * std::pow(hh, n)), 1e-12) << n;
        EXPECT_LT(rel(eta_level_norms(eta, n + 1)[n], 0.7 * std::pow(hh, 0.5 * n)), 1e-12) << n;
    }
}

TEST(Kernels, WickSeries) {
    acceptance::WickSetup w(2048);
    for (double t : {0.5, 1.0}) {
        const auto S = build_kernels(w.a, w.b, w.eta, t, 12);
        const auto m2 = second_moment(S);
        for (int n = 0; n <= 12; ++n) {
            const double ref = std::pow(w.sigma, 2 * n) * std::pow(t, 2 * w.H * n) / factorial(n);
            EXPECT_LT(rel(factorial(n) * kernel_norm_sq(S, n), ref), 2e-2) << n;
        }
        EXPECT_LT(rel(m2.value, std::exp(w.sigma * w.sigma * std::pow(t, 2 * w.H))), 1e-6);
        EXPECT_FALSE(m2.tail_flag);
    }
}

TEST(Kernels, NoDiffusionKeepsEta) {
    Case s(256);
    const auto b = constant_element(s.g, s.o, 0.0);
    const auto a = SampledFunction::from(s.g, [](double u) { return 0.3 - u; });
    const auto h = s.smooth(2.0);
    const double hh = inner(h, h);
    EtaSpec eta = EtaSpec::deterministic(1.5);
    eta.add(0.4, {h}).add(0.2, {h, h});
    const double Eeta2 = 1.5 * 1.5 + 0.16 * hh + 2 * 0.04 * hh * hh;
    const FbmSampler sampler(0.3, s.g);
    const auto path = sampler.sample(3, 0);
    const double Bh = wiener_integral(path, h);
    const double eta_path = 1.5 + 0.4 * Bh + 0.2 * (Bh * Bh - hh);
    for (double t : {0.0, 0.5, 1.0}) {
        const auto S = build_kernels(a, b, eta, t, 4);
        const double e = std::exp(0.3 * t - 0.5 * t * t);
        EXPECT_LT(rel(second_moment(S).value, Eeta2 * e * e), 1e-5) << t;
        EXPECT_LT(rel(evaluate_solution(S, path).value, eta_path * e), 1e-5) << t;
    }
}

TEST(Kernels, WickPathwise) {
    acceptance::WickSetup w(256);
    const FbmSampler sampler(w.H, w.g);
    const auto S = build_kernels(w.a, w.b, w.eta, 1.0, 12);
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto p = sampler.sample(1, i);
        EXPECT_LT(rel(evaluate_solution(S, p).value, w.exact(p.values[256], 1.0)), 1e-6);
    }
}

TEST(Kernels, RecursionResidual) {
    Case s(512);
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k <= 512; ++k) nodes.push_back(k);
    const auto b = to_phi(SampledFunction::from(s.g, [](double u) { return 0.5 + 0.2 * u; }), s.o, 2.5);
    const auto S1 = build_kernels(s.zero, b, EtaSpec::deterministic(1.0), 1.0, 2);
    EXPECT_LT(kernel_recursion_check(S1, 1, nodes).max_residual, 1e-8);

    EtaSpec first = EtaSpec::deterministic(0.0);
    first.add(1.0, {s.smooth(2.0)});
    const auto a = SampledFunction::from(s.g, [](double u) { return 0.2 * u; });
    const auto S2 = build_kernels(a, b, first, 0.5, 3);
    EXPECT_LE(kernel_recursion_check(S2, 2, nodes).max_residual, 5e-2);
}

TEST(Kernels, MonteCarloMoments) {
    acceptance::WickSetup w(128);
    const FbmSampler sampler(w.H, w.g);
    const auto Ss = build_kernels(w.a, w.b, w.eta, 0.25, 12);
    const auto St = build_kernels(w.a, w.b, w.eta, 0.75, 12);
    const std::size_t n = 20000;
    double m = 0, m2 = 0, inc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = sampler.sample(77, i);
        const double xs = evaluate_solution(Ss, p).value, xt = evaluate_solution(St, p).value;
        m += xt, m2 += xt * xt, inc += (xt - xs) * (xt - xs);
    }
    m /= n, m2 /= n, inc /= n;
    EXPECT_LT(std::abs(m - mean(St)), 3 * std::sqrt((m2 - m * m) / n));
    EXPECT_LT(rel(inc, increment_second_moment(St, Ss)), 0.05);
}

TEST(Kernels, HolderEstimate) {
    acceptance::WickSetup w(256);
    const FbmSampler sampler(w.H, w.g);
    std::vector<std::pair<double, double>> pairs;
    for (int m = 4; m <= 64; m *= 2) pairs.push_back({0.5, 0.5 + m / 256.0});

    const auto flat = holder_exponent_estimate(w.a, constant_element(w.g, w.order, 0.0), w.eta, 4, 2.0, pairs,
                                               sampler, 200, 1);
    for (double v : flat.fit.values) EXPECT_EQ(v, 0.0);

    const auto est = holder_exponent_estimate(w.a, w.b, w.eta, 12, 2.0, pairs, sampler, 10000, 2);
    EXPECT_GE(est.delta, holder_exponent_bound(w.order, 3.0) - 0.05);
}

// ---- conditions

TEST(Conditions, ExponentCheck) {
    const auto r = continuity_condition(exp_growth_log_norms(1.0), 2.0, FracOrder(0.25), 3.0);
    ASSERT_TRUE(r.exponent_check.has_value());
    EXPECT_TRUE(*r.exponent_check);
    EXPECT_NEAR(holder_exponent_bound(FracOrder(0.25), 3.0), 1.0 / 12, 1e-15);
    EXPECT_FALSE(*continuity_condition(exp_growth_log_norms(1.0), 0.5, FracOrder(0.25), 3.0).exponent_check);
}

TEST(Conditions, BoundConstants) {
    const auto g = make_grid(1.0, 256);
    const FracOrder o(0.25);
    const auto b = restrict(constant_element(g, o, 0.8), 0.5);
    const double c = default_operator_norm(o, 3.0);
    const auto z = bound_constants(o, 3.0, 1.0, SampledFunction(g, 0.0), b, c);
    EXPECT_EQ(z.A, 0.0);
    const auto k = bound_constants(o, 3.0, 1.0, SampledFunction(g, 0.4), b, c);
    for (double v : {k.A, k.B_H_p_t, k.B_T_p, k.B_p}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GT(v, 0.0);
    }
    EXPECT_NEAR(o.alpha() / std::tgamma(1 - o.alpha()) * k.B_p, k.B_T_p, 1e-12 * k.B_T_p);
}

TEST(Conditions, DecayVerdict) {
    std::vector<double> geo, flat, grow, vanish{0.0, 1.0, 2.0};
    for (int k = 0; k < 20; ++k) geo.push_back(-0.5 * k), flat.push_back(3.0), grow.push_back(0.1 * k);
    vanish.resize(12, -INFINITY);
    EXPECT_EQ(decay_verdict(geo), Verdict::pass);
    EXPECT_EQ(decay_verdict(flat), Verdict::fail);
    EXPECT_EQ(decay_verdict(grow), Verdict::fail);
    EXPECT_EQ(decay_verdict(vanish), Verdict::pass);
    EXPECT_EQ(decay_verdict({0.0, -1.0}), Verdict::inconclusive);
}

TEST(Conditions, Taxonomy) {
    const auto g = make_grid(1.0, 256);
    const FracOrder o(0.25);
    const auto b = constant_element(g, o, 4.0);
    const auto sup = sup_b_constant(o, 2.5, SampledFunction(g, 0.0), b, default_operator_norm(o, 2.5));
    EXPECT_GE(sup.value, 1.0);

    const auto e = to_phi(SampledFunction::from(g, [](double u) { return 1.0 + u; }), o);
    EtaSpec finite = EtaSpec::deterministic(1.0);
    finite.add(0.5, {e}).add(0.25, {e, e});
    const auto fin = tabulated_log_norms(eta_level_norms(finite, 40));
    EXPECT_EQ(solvability_condition(fin, sup).verdict, Verdict::pass);
    EXPECT_EQ(continuity_condition(fin, 2.0, o, 3.0).verdict, Verdict::pass);

    const auto expg = solvability_condition(exp_growth_log_norms(2.0), sup);
    EXPECT_EQ(expg.verdict, Verdict::pass);
    EXPECT_GT(expg.log_series_terms.size(), 40u);

    const auto crit = critical_log_norms(sup.value);
    const auto cs = solvability_condition(crit, sup);
    EXPECT_EQ(cs.verdict, Verdict::fail);
    for (std::size_t k = 0; k < cs.log_series_terms.size(); ++k) EXPECT_NEAR(cs.log_series_terms[k], 0.0, 1e-9);
    EXPECT_EQ(continuity_condition(crit, 0.5 * std::log(sup.value) - 1.0, o, 3.0).verdict, Verdict::pass);

    const auto text = format_report(cs);
    EXPECT_EQ(text.rfind("verdict = fail\n", 0), 0u);
}
