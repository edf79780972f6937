#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chaos.hpp"
#include "conditions.hpp"
#include "fbm.hpp"
#include "fraccalc.hpp"
#include "grid.hpp"
#include "lambda_space.hpp"
#include "permanent.hpp"

namespace frachaos {

/// One line of the acceptance battery. `passed` includes the runtime limit.
struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    double measured = 0;
    double threshold = 0;
    double seconds = 0;
    double time_limit = 0;
    std::string detail;
};

namespace acceptance {

using Clock = std::chrono::steady_clock;

inline CriterionResult timed(int id, std::string name, double limit, const std::function<void(CriterionResult&)>& body) {
    CriterionResult r;
    r.id = id;
    r.name = std::move(name);
    r.time_limit = limit;
    const auto t0 = Clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (r.seconds > limit) {
        r.passed = false;
        r.detail += (r.detail.empty() ? "" : "; ") + std::string("runtime limit exceeded");
    }
    return r;
}

/// Smooth random φ: a short cosine series with decaying amplitudes.
inline SampledFunction random_smooth(const Grid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double c[6], ph[6];
    for (int k = 0; k < 6; ++k) c[k] = U(rng) / (1.0 + k), ph[k] = 3.14159 * U(rng);
    return SampledFunction::from(g, [&](double u) {
        double s = 0;
        for (int k = 0; k < 6; ++k) s += c[k] * std::cos(k * M_PI * u / g.horizon() + ph[k]);
        return s;
    });
}

inline CriterionResult operator_inversion() {
    return timed(1, "operator inversion D(I phi) = phi", 30.0, [](CriterionResult& r) {
        const Grid g = make_grid(1.0, 2048);
        std::mt19937_64 rng(101);
        double worst = 0;
        for (double a : {0.1, 0.25, 0.4}) {
            const FracOrder o(a);
            for (int i = 0; i < 20; ++i) {
                const auto phi = random_smooth(g, rng);
                const auto back = frac_derivative(frac_integral(phi, o), o).values;
                worst = std::max(worst, l_p_norm(back - phi, 2.0) / l_p_norm(phi, 2.0));
            }
        }
        r.measured = worst;
        r.threshold = 1e-2;
        r.passed = worst <= r.threshold;
        r.detail = "max relative L2 error, N=2048, 60 functions";
    });
}

inline CriterionResult isometry_anchor() {
    return timed(2, "isometry <1_t,1_s> = R_H(t,s)", 120.0, [](CriterionResult& r) {
        const std::size_t N = 4096;
        const Grid g = make_grid(1.0, std::int64_t(N));
        std::mt19937_64 rng(202);
        std::uniform_int_distribution<std::size_t> node(1, N);
        double worst = 0;
        for (double H : {0.1, 0.25, 0.4}) {
            const auto o = FracOrder::from_hurst(H);
            const auto K = space_constants(o);
            for (int i = 0; i < 20; ++i) {
                const double t = g.node(node(rng)), s = g.node(node(rng));
                const double v = inner(indicator_element(g, o, t), indicator_element(g, o, s), K);
                const double R = covariance(H, t, s);
                worst = std::max(worst, std::abs(v - R) / R);
            }
        }
        r.measured = worst;
        r.threshold = 1e-2;
        r.passed = worst <= r.threshold;
        r.detail = "max relative error, N=4096, 60 pairs";
    });
}

inline CriterionResult exact_sampling(std::uint64_t seed) {
    return timed(3, "fBm covariance within 3 standard errors", 60.0, [seed](CriterionResult& r) {
        const double H = 0.2;
        const std::size_t N = 256, n_paths = 10000;
        const Grid g = make_grid(1.0, std::int64_t(N));
        FbmSampler sampler(H, g);
        std::mt19937_64 rng(303);
        std::uniform_int_distribution<std::size_t> node(1, N);
        std::vector<std::pair<std::size_t, std::size_t>> probes(16);
        for (auto& p : probes) p = {node(rng), node(rng)};
        std::vector<std::vector<double>> prod(n_paths, std::vector<double>(probes.size()));
        parallel_for(n_paths, [&](std::size_t i) {
            const auto path = sampler.sample(seed, i);
            for (std::size_t k = 0; k < probes.size(); ++k)
                prod[i][k] = path.values[probes[k].first] * path.values[probes[k].second];
        });
        double worst = 0;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            double m = 0, m2 = 0;
            for (std::size_t i = 0; i < n_paths; ++i) m += prod[i][k], m2 += prod[i][k] * prod[i][k];
            m /= n_paths;
            const double se = std::sqrt((m2 / n_paths - m * m) / (n_paths - 1));
            const double R = covariance(H, g.node(probes[k].first), g.node(probes[k].second));
            worst = std::max(worst, std::abs(m - R) / se);
        }
        r.measured = worst;
        r.threshold = 3.0;
        r.passed = worst <= r.threshold;
        r.detail = "max |cov - R_H| in standard errors, 10^4 paths, 16 node pairs, N=256";
    });
}

/// η = 1, a = 0, b = σ, H = 0.3, T = 1.
struct WickSetup {
    double H = 0.3, sigma = 0.5;
    Grid g;
    FracOrder order = FracOrder::from_hurst(0.3);
    SampledFunction a;
    LambdaElement b;
    EtaSpec eta = EtaSpec::deterministic(1.0);

    explicit WickSetup(std::size_t N)
        : g(make_grid(1.0, std::int64_t(N))), a(g, 0.0), b(constant_element(g, order, sigma)) {}
    double exact(double Bt, double t) const {
        return std::exp(sigma * Bt - 0.5 * sigma * sigma * std::pow(t, 2 * H));
    }
};

inline constexpr std::size_t kWickCells = 2048;

inline CriterionResult wick_pathwise(std::uint64_t seed) {
    return timed(4, "Wick exponential pathwise", 60.0, [seed](CriterionResult& r) {
        WickSetup w(kWickCells);
        FbmSampler sampler(w.H, w.g);
        std::vector<ChaosSolution> slices;
        for (double t : {0.25, 0.5, 1.0}) slices.push_back(build_kernels(w.a, w.b, w.eta, t, 12));
        std::vector<double> err(1000, 0.0);
        parallel_for(err.size(), [&](std::size_t i) {
            const auto path = sampler.sample(seed, i);
            for (const auto& S : slices) {
                const double x = evaluate_solution(S, path).value;
                const double e = w.exact(path.values[S.t_index], S.t);
                err[i] = std::max(err[i], std::abs(x - e) / std::abs(e));
            }
        });
        r.measured = *std::max_element(err.begin(), err.end());
        r.threshold = 1e-6;
        r.passed = r.measured <= r.threshold;
        r.detail = "max relative error over 1000 paths, t in {0.25,0.5,1}, n_max=12, N=2048";
    });
}

inline CriterionResult moment_identities(std::uint64_t seed) {
    return timed(5, "moment identities", 180.0, [seed](CriterionResult& r) {
        std::ostringstream d;
        double series_err = 0;
        {
            WickSetup w(kWickCells);
            for (double t : {0.25, 0.5, 1.0}) {
                const auto S = build_kernels(w.a, w.b, w.eta, t, 12);
                const double exact = std::exp(w.sigma * w.sigma * std::pow(t, 2 * w.H));
                series_err = std::max(series_err, std::abs(second_moment(S).value - exact) / exact);
            }
        }
        WickSetup w(256);
        FbmSampler sampler(w.H, w.g);
        const std::size_t n_paths = 100000;
        double mc_err = 0, mean_z = 0;
        for (double t : {0.25, 0.5, 1.0}) {
            const auto S = build_kernels(w.a, w.b, w.eta, t, 12);
            std::vector<double> x(n_paths);
            parallel_for(n_paths, [&](std::size_t i) { x[i] = evaluate_solution(S, sampler.sample(seed, i)).value; });
            double m = 0, m2 = 0;
            for (double v : x) m += v, m2 += v * v;
            m /= n_paths;
            m2 /= n_paths;
            const double sd = std::sqrt((m2 - m * m) / (n_paths - 1));
            mc_err = std::max(mc_err, std::abs(m2 - second_moment(S).value) / second_moment(S).value);
            mean_z = std::max(mean_z, std::abs(m - mean(S)) / sd);
        }
        d << "series rel err " << series_err << " (<= 1e-6, N=2048); MC E X^2 rel err " << mc_err
          << " (<= 0.05, 1e5 paths, N=256); mean |z| " << mean_z << " (<= 3)";
        r.measured = series_err;
        r.threshold = 1e-6;
        r.passed = series_err <= 1e-6 && mc_err <= 0.05 && mean_z <= 3.0;
        r.detail = d.str();
    });
}

inline CriterionResult kernel_recursion() {
    return timed(6, "kernel recursion residual", 120.0, [](CriterionResult& r) {
        const Grid g = make_grid(1.0, 1024);
        const auto o = FracOrder::from_hurst(0.3);
        const auto a = SampledFunction::from(g, [](double u) { return 0.4 - 0.3 * u; });
        const auto b = to_phi(SampledFunction::from(g, [](double u) { return 0.5 + 0.2 * std::sin(3 * u); }), o, 2.5);
        const auto e1 = to_phi(SampledFunction::from(g, [](double u) { return std::cos(2 * u); }), o);
        EtaSpec det = EtaSpec::deterministic(1.0);
        EtaSpec first = EtaSpec::deterministic(0.5);
        first.add(1.0, {e1});
        std::vector<std::size_t> nodes;
        for (std::size_t k = 0; k <= g.n_cells(); ++k) nodes.push_back(k);
        double worst = 0;
        for (const auto* eta : {&det, &first})
            for (double t : {0.5, 1.0}) {
                const auto S = build_kernels(a, b, *eta, t, 4);
                for (int n = 1; n <= 4; ++n)
                    worst = std::max(worst, kernel_recursion_check(S, n, nodes, 64, 600 + n).max_residual);
            }
        r.measured = worst;
        r.threshold = 5e-2;
        r.passed = worst <= r.threshold;
        r.detail = "max relative residual, n<=4, N=1024, deterministic and first-chaos eta, a != 0";
    });
}

inline CriterionResult condition_taxonomy() {
    return timed(7, "condition checker taxonomy", 10.0, [](CriterionResult& r) {
        const Grid g = make_grid(1.0, 256);
        const auto o = FracOrder(0.25);
        const double p = 3.0, p_tilde = 2.5;
        const auto a = SampledFunction(g, 0.0);
        const auto b = constant_element(g, o, 4.0);
        const auto sup = sup_b_constant(o, p_tilde, a, b, default_operator_norm(o, p_tilde));
        const int L = 40;

        const auto e1 = to_phi(SampledFunction::from(g, [](double u) { return 1.0 + u; }), o);
        EtaSpec finite = EtaSpec::deterministic(1.0);
        finite.add(0.5, {e1}).add(0.25, {e1, e1});
        const auto fin = solvability_condition(tabulated_log_norms(eta_level_norms(finite, L)), sup);
        const auto expg = solvability_condition(exp_growth_log_norms(2.0), sup);
        const auto crit = critical_log_norms(sup.value);
        const auto crit_solv = solvability_condition(crit, sup);
        const double theta = 0.5 * std::log(sup.value) - 1.0;
        const auto crit_cont = continuity_condition(crit, theta, o, p);

        std::ostringstream d;
        d << "sup B = " << sup.value << "; finite: " << to_string(fin.verdict) << ", exp-growth: "
          << to_string(expg.verdict) << ", critical solvability: " << to_string(crit_solv.verdict)
          << ", critical continuity (theta " << theta << "): " << to_string(crit_cont.verdict)
          << "; exp-growth needed " << expg.log_series_terms.size() << " levels";
        r.detail = d.str();
        const int ok = (fin.verdict == Verdict::pass) + (expg.verdict == Verdict::pass) +
                       (crit_solv.verdict == Verdict::fail) + (crit_cont.verdict == Verdict::pass);
        r.measured = ok;
        r.threshold = 4;
        r.passed = ok == 4;
    });
}

inline CriterionResult tail_kernel_bound() {
    return timed(8, "tail kernel inequality", 30.0, [](CriterionResult& r) {
        std::mt19937_64 rng(808);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double worst = 0;
        for (double a : {0.05, 0.25, 0.45}) {
            const FracOrder o(a);
            for (int i = 0; i < 10000; ++i) {
                double x[3] = {U(rng), U(rng), U(rng)};
                std::sort(x, x + 3);
                if (!(0 < x[0] && x[0] < x[1] && x[1] < x[2])) continue;
                const auto s = tail_kernel_inequality(x[0], x[1], x[2], o);
                worst = std::max(worst, s.lhs / s.rhs);
            }
        }
        r.measured = worst;
        r.threshold = 1.0 + 1e-6;
        r.passed = worst <= r.threshold;
        r.detail = "max lhs/rhs over 3 x 10^4 triples";
    });
}

inline CriterionResult holder_modulus() {
    return timed(9, "tensor-power Holder exponent", 120.0, [](CriterionResult& r) {
        const Grid g = make_grid(1.0, 4096);
        const auto o = FracOrder::from_hurst(0.3);
        const double p = 3.0;
        const auto b = to_phi(SampledFunction::from(g, [](double u) { return 1.0 + 0.5 * std::sin(2 * M_PI * u); }), o, p);
        std::vector<std::pair<double, double>> pairs;
        const double s = 0.5, h = g.spacing();
        for (int m = 8; m <= 1024; m *= 2) pairs.push_back({s, s + m * h});
        const double bound = holder_exponent_bound(o, p);
        double worst = INFINITY;
        std::ostringstream d;
        for (int n = 1; n <= 3; ++n) {
            const auto fit = tensor_power_increment(b, n, pairs);
            worst = std::min(worst, fit.slope);
            d << "n=" << n << " slope " << fit.slope << "; ";
        }
        d << "t-s from 8h to 1024h, N=4096";
        r.measured = worst;
        r.threshold = 0.95 * bound;
        r.passed = worst >= r.threshold;
        r.detail = d.str();
    });
}

inline double naive_permanent(const Eigen::MatrixXd& A) {
    const int n = int(A.rows());
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    double s = 0;
    do {
        double t = 1;
        for (int i = 0; i < n; ++i) t *= A(i, p[i]);
        s += t;
    } while (std::next_permutation(p.begin(), p.end()));
    return s;
}

inline CriterionResult permanent_exactness() {
    return timed(10, "Ryser permanent vs enumeration", 5.0, [](CriterionResult& r) {
        std::mt19937_64 rng(1010);
        std::uniform_int_distribution<int> v(-9, 9);
        double worst = 0;
        for (int c = 0; c < 50; ++c) {
            const int n = 1 + c % 7;
            Eigen::MatrixXd A(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) A(i, j) = v(rng);
            worst = std::max(worst, std::abs(permanent(A) - naive_permanent(A)));
        }
        r.measured = worst;
        r.threshold = 0;
        r.passed = worst == 0;
        r.detail = "max |Ryser - enumeration| over 50 integer matrices up to 7x7";
    });
}

}  // namespace acceptance

inline std::vector<CriterionResult> run_acceptance(std::uint64_t seed = 20240607) {
    using namespace acceptance;
    return {operator_inversion(), isometry_anchor(),       exact_sampling(seed), wick_pathwise(seed),
            moment_identities(seed), kernel_recursion(),   condition_taxonomy(), tail_kernel_bound(),
            holder_modulus(),       permanent_exactness()};
}

inline std::string format_result(const CriterionResult& r) {
    std::ostringstream os;
    os.precision(8);
    os << "criterion " << r.id << " " << (r.passed ? "PASS" : "FAIL") << " | " << r.name << " | measured "
       << r.measured << " threshold " << r.threshold << " | " << r.seconds << " s (limit " << r.time_limit
       << " s) | " << r.detail;
    return os.str();
}

}  // namespace frachaos
