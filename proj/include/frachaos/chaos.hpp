#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "csv.hpp"
#include "errors.hpp"
#include "fbm.hpp"
#include "grid.hpp"
#include "lambda_space.hpp"
#include "parallel.hpp"
#include "permanent.hpp"

namespace frachaos {

/// c · sym(g_1 ⊗ ... ⊗ g_k).
struct EtaTerm {
    double coefficient = 0;
    std::vector<LambdaElement> factors;
};

/// Initial condition η = η_0 + Σ_k I_k(η̃_k), each η̃_k a sum of EtaTerms.
struct EtaSpec {
    double eta0 = 0.0;
    std::map<int, std::vector<EtaTerm>> levels;

    static EtaSpec deterministic(double eta0) {
        EtaSpec e;
        e.eta0 = eta0;
        return e;
    }
    EtaSpec& add(double c, std::vector<LambdaElement> factors) {
        require(!factors.empty(), "EtaSpec::add: use eta0 for the constant term");
        const int k = int(factors.size());
        levels[k].push_back({c, std::move(factors)});
        return *this;
    }
    int max_level() const { return levels.empty() ? 0 : levels.rbegin()->first; }
    const std::vector<EtaTerm>* level(int k) const {
        auto it = levels.find(k);
        return it == levels.end() ? nullptr : &it->second;
    }
};

/// One summand of f̃_n^t: coefficient · sym((b1_{[0,t]})^{⊗j} ⊗ η-term).
struct KernelTerm {
    double coefficient = 0;
    int b_power = 0;
    int eta_level = 0;
    std::size_t eta_term = 0;
    bool exp_a_factor = true;  // coefficient already carries e(t) = exp ∫_0^t a
};

/// Kernels f̃_n^t, n <= n_max, at one time node.
struct ChaosSolution {
    SampledFunction drift;
    LambdaElement diffusion;
    EtaSpec eta;
    int n_max = 0;
    double t = 0;
    std::size_t t_index = 0;
    double growth = 1;  // e(t)
    std::vector<std::vector<KernelTerm>> kernels;
    /// elements[0] = b1_{[0,t]}, then η factors level by level.
    std::vector<LambdaElement> elements;
    std::map<std::pair<int, std::size_t>, std::vector<int>> eta_index;
    Eigen::MatrixXd gram;

    std::vector<int> factor_indices(const KernelTerm& k) const {
        std::vector<int> idx(k.b_power, 0);
        if (k.eta_level > 0) {
            const auto& e = eta_index.at({k.eta_level, k.eta_term});
            idx.insert(idx.end(), e.begin(), e.end());
        }
        return idx;
    }
};

inline double factorial(int n) { return std::tgamma(n + 1.0); }

/// f̃_n^t = e(t)[η̃_n + Σ_{j=1}^n (1/j!) sym((b1_{[0,t]})^{⊗j} ⊗ η̃_{n-j})]; the 1/j!
/// comes from summing over ordered index tuples.
inline ChaosSolution build_kernels(const SampledFunction& a, const LambdaElement& b, const EtaSpec& eta,
                                   double t, int n_max) {
    const Grid& g = b.grid();
    require(a.grid() == g, "build_kernels: drift and diffusion grids differ");
    require(n_max >= 0 && n_max <= 12 + eta.max_level(), "build_kernels: n_max must lie in [0, 12 + eta max level]");
    require(b.p_hint >= 2.0 && b.order.alpha() * b.p_hint < 1.0, "build_kernels: b.p_hint must lie in [2, 1/alpha)");
    auto J = g.node_index(t);
    require(J.has_value(), "build_kernels: t must be a grid node");

    ChaosSolution S{a, b, eta, n_max, g.node(*J), *J, 1.0, {}, {}, {}, {}};
    S.growth = std::exp(cumulative_trapezoid(a)[*J]);
    S.elements.push_back(restrict(b, S.t));
    for (const auto& [k, terms] : eta.levels)
        for (std::size_t i = 0; i < terms.size(); ++i) {
            require(int(terms[i].factors.size()) == k, "build_kernels: eta term arity differs from its level");
            std::vector<int> idx;
            for (const auto& f : terms[i].factors) {
                require(f.grid() == g && f.order == b.order, "build_kernels: eta factor on another grid/order");
                idx.push_back(int(S.elements.size()));
                S.elements.push_back(f);
            }
            S.eta_index[{k, i}] = idx;
        }
    const int m = int(S.elements.size());
    S.gram.resize(m, m);
    const auto K = space_constants(b.order);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= i; ++j) S.gram(i, j) = S.gram(j, i) = inner(S.elements[i], S.elements[j], K);

    S.kernels.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n)
        for (int j = 0; j <= n; ++j) {
            const int lvl = n - j;
            const double w = S.growth / factorial(j);
            if (lvl == 0) {
                if (eta.eta0 != 0.0) S.kernels[n].push_back({w * eta.eta0, j, 0, 0, true});
            } else if (auto* terms = eta.level(lvl)) {
                for (std::size_t i = 0; i < terms->size(); ++i)
                    if ((*terms)[i].coefficient != 0.0)
                        S.kernels[n].push_back({w * (*terms)[i].coefficient, j, lvl, i, true});
            }
        }
    return S;
}

/// ⟨f̃_n^{t1}, f̃_n^{t2}⟩ in the n-fold tensor space via Gram permanents.
inline double kernel_inner(const ChaosSolution& x, const ChaosSolution& y, int n) {
    require(n >= 0 && n <= std::min(x.n_max, y.n_max), "kernel_inner: level out of range");
    const auto& tx = x.kernels[n];
    const auto& ty = y.kernels[n];
    if (tx.empty() || ty.empty()) return 0.0;
    Eigen::MatrixXd C;
    if (&x == &y) {
        C = x.gram;
    } else {
        const auto K = space_constants(x.diffusion.order);
        C.resize(x.elements.size(), y.elements.size());
        for (std::size_t i = 0; i < x.elements.size(); ++i)
            for (std::size_t j = 0; j < y.elements.size(); ++j)
                C(i, j) = (i > 0 && j > 0 && i < x.gram.rows() && j < x.gram.cols() &&
                           x.elements.size() == y.elements.size())
                              ? x.gram(i, j)
                              : inner(x.elements[i], y.elements[j], K);
    }
    double s = 0.0;
    Eigen::MatrixXd M(n, n);
    for (const auto& p : tx) {
        const auto ip = x.factor_indices(p);
        for (const auto& q : ty) {
            const auto iq = y.factor_indices(q);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) M(r, c) = C(ip[r], iq[c]);
            s += p.coefficient * q.coefficient * (n == 0 ? 1.0 : permanent(M));
        }
    }
    return s / factorial(n);
}

inline double kernel_norm_sq(const ChaosSolution& s, int n) { return kernel_inner(s, s, n); }

inline double mean(const ChaosSolution& s) { return s.eta.eta0 * s.growth; }

struct SecondMoment {
    double value = 0;
    std::vector<double> terms;  // n! ‖f̃_n^t‖²
    bool tail_flag = false;     // ratio test on the last three terms is not reassuring
};

inline bool series_tail_suspicious(const std::vector<double>& terms, double total) {
    const std::size_t n = terms.size();
    if (n < 3) return false;
    const double a = terms[n - 3], b = terms[n - 2], c = terms[n - 1];
    if (a == 0.0 && b == 0.0 && c == 0.0) return false;
    if (b == 0.0 && c == 0.0) return false;
    if (a <= 0.0 || b <= 0.0) return true;
    const double r = std::max(b / a, c / b);
    if (r >= 1.0) return true;
    return c * r / (1.0 - r) > 1e-6 * std::abs(total);
}

/// E X_t² = Σ n! ‖f̃_n^t‖².
inline SecondMoment second_moment(const ChaosSolution& s) {
    SecondMoment m;
    for (int n = 0; n <= s.n_max; ++n) {
        m.terms.push_back(factorial(n) * kernel_norm_sq(s, n));
        m.value += m.terms.back();
    }
    m.tail_flag = series_tail_suspicious(m.terms, m.value);
    return m;
}

/// E|X_t - X_s|² = Σ n! ‖f̃_n^t - f̃_n^s‖².
inline double increment_second_moment(const ChaosSolution& x, const ChaosSolution& y) {
    double s = 0.0;
    for (int n = 0; n <= std::min(x.n_max, y.n_max); ++n)
        s += factorial(n) * (kernel_norm_sq(x, n) + kernel_norm_sq(y, n) - 2.0 * kernel_inner(x, y, n));
    return s;
}

struct SolutionValue {
    double value = 0;
    std::vector<double> per_level;
};

namespace detail {

// I_n(sym(⊗ g_{d_i}^{m_i})) from the distinct factors' B values and Gram block,
// polarizing over the multiplicity box Π [0, m_i] instead of {0,1}^n.
inline double multiset_integral(const std::vector<int>& idx, const std::vector<double>& B, const Eigen::MatrixXd& G) {
    const int n = int(idx.size());
    if (n == 0) return 1.0;
    std::map<int, int> mult;
    for (int i : idx) ++mult[i];
    std::vector<int> d, m;
    for (auto [k, c] : mult) d.push_back(k), m.push_back(c);
    const int k = int(d.size());
    if (k == 1) return power_integral(n, B[d[0]], G(d[0], d[0]));
    double scale = 0.0;
    for (int i = 0; i < k; ++i) scale += m[i] * m[i] * std::abs(G(d[i], d[i]));
    std::vector<int> c(k, 0);
    double s = 0.0;
    while (true) {
        int i = 0;
        while (i < k && c[i] == m[i]) c[i++] = 0;
        if (i == k) break;
        ++c[i];
        int tot = 0;
        double w = 1.0, bb = 0.0, v = 0.0;
        for (int r = 0; r < k; ++r) {
            tot += c[r];
            w *= std::round(std::exp(std::lgamma(m[r] + 1.0) - std::lgamma(c[r] + 1.0) - std::lgamma(m[r] - c[r] + 1.0)));
            bb += c[r] * B[d[r]];
            for (int q = 0; q < k; ++q) v += c[r] * c[q] * G(d[r], d[q]);
        }
        if (v <= 1e-13 * scale) continue;
        s += ((n - tot) % 2 ? -w : w) * power_integral(n, bb, v);
    }
    return s / factorial(n);
}

}  // namespace detail

/// X_t on one path: Σ_n I_n(f̃_n^t), per KernelTerm by Hermite/polarization.
inline SolutionValue evaluate_solution(const ChaosSolution& s, const FbmPath& path) {
    require(path.grid == s.diffusion.grid(), "evaluate_solution: path grid differs");
    std::vector<double> B(s.elements.size());
    for (std::size_t i = 0; i < B.size(); ++i) B[i] = wiener_integral(path, s.elements[i]);
    SolutionValue out;
    out.per_level.assign(s.n_max + 1, 0.0);
    for (int n = 0; n <= s.n_max; ++n) {
        for (const auto& k : s.kernels[n]) {
            const auto idx = s.factor_indices(k);
            require(idx.size() <= 12 || std::all_of(idx.begin(), idx.end(), [&](int i) { return i == idx[0]; }),
                    "evaluate_solution: polarization arity above 12");
            out.per_level[n] += k.coefficient * detail::multiset_integral(idx, B, s.gram);
        }
        out.value += out.per_level[n];
    }
    return out;
}

/// `n,term_index,coefficient,j,eta_level`
inline void write_kernel_csv(std::ostream& os, const ChaosSolution& s) {
    os << "n,term_index,coefficient,j,eta_level\n";
    for (int n = 0; n <= s.n_max; ++n)
        for (std::size_t i = 0; i < s.kernels[n].size(); ++i) {
            const auto& k = s.kernels[n][i];
            os << n << ',' << i << ',' << csv_number(k.coefficient) << ',' << k.b_power << ',' << k.eta_level << '\n';
        }
}

struct RecursionReport {
    double max_residual = 0;  // max |lhs - rhs| / max |lhs| over the tuples
    double max_abs_lhs = 0;
    std::size_t n_tuples = 0;
};

namespace detail {

// Pointwise f_n^s(t_1..t_n) at node s from the symbolic kernel structure, using
// the closed indicator 1{t_l <= s} on the b factors.
struct PointKernel {
    const ChaosSolution& S;
    std::vector<double> e;  // e(s) at nodes

    explicit PointKernel(const ChaosSolution& s) : S(s) {
        auto c = cumulative_trapezoid(s.drift);
        e.resize(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) e[k] = std::exp(c[k]);
    }

    double eta_part(int n, int j, std::size_t sidx, const std::vector<std::size_t>& tup) const {
        const int lvl = n - j;
        const auto& bf = S.diffusion.f.values();
        Eigen::MatrixXd M(n, n);
        for (int r = 0; r < j; ++r)
            for (int c = 0; c < n; ++c) M(r, c) = tup[c] <= sidx ? bf[tup[c]] : 0.0;
        if (lvl == 0) return S.eta.eta0 * (n == 0 ? 1.0 : permanent(M)) / factorial(n);
        auto* terms = S.eta.level(lvl);
        if (!terms) return 0.0;
        double s = 0.0;
        for (const auto& term : *terms) {
            for (int r = 0; r < lvl; ++r)
                for (int c = 0; c < n; ++c) M(j + r, c) = term.factors[r].f[tup[c]];
            s += term.coefficient * permanent(M);
        }
        return s / factorial(n);
    }

    double operator()(int n, std::size_t sidx, const std::vector<std::size_t>& tup) const {
        double s = 0.0;
        for (int j = 0; j <= n; ++j) s += eta_part(n, j, sidx, tup) / factorial(j);
        return e[sidx] * s;
    }
};

}  // namespace detail

/// Checks f_n^t(t⃗) = η_n(t⃗) + ∫_0^t a(s) f_n^s(t⃗) ds + (1/n) Σ_j b(t_j) f_{n-1}^{t_j}(t⃗ \ t_j) 1{t_j <= t}
/// on random node tuples drawn from `tuple_nodes`.
inline RecursionReport kernel_recursion_check(const ChaosSolution& S, int n, const std::vector<std::size_t>& tuple_nodes,
                                              std::size_t n_tuples = 64, std::uint64_t seed = 7) {
    require(n >= 1, "kernel_recursion_check: n must be >= 1");
    require(!tuple_nodes.empty(), "kernel_recursion_check: no candidate nodes");
    detail::PointKernel K(S);
    const Grid& g = S.diffusion.grid();
    const double h = g.spacing();
    const auto& av = S.drift.values();
    const auto& bf = S.diffusion.f.values();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, tuple_nodes.size() - 1);
    RecursionReport rep;
    rep.n_tuples = n_tuples;
    double max_diff = 0.0;
    std::vector<std::size_t> tup(n), rest(n - 1);
    for (std::size_t it = 0; it < n_tuples; ++it) {
        for (auto& x : tup) x = tuple_nodes[pick(rng)];
        const double lhs = K(n, S.t_index, tup);
        double rhs = K.eta_part(n, 0, 0, tup);
        double drift = 0.0;
        for (std::size_t k = 0; k <= S.t_index; ++k) {
            if (av[k] == 0.0) continue;
            const double w = (k == 0 || k == S.t_index) ? 0.5 * h : h;
            drift += w * av[k] * K(n, k, tup);
        }
        rhs += drift;
        double jump = 0.0;
        for (int l = 0; l < n; ++l) {
            if (tup[l] > S.t_index) continue;
            for (int r = 0, q = 0; r < n; ++r)
                if (r != l) rest[q++] = tup[r];
            jump += bf[tup[l]] * K(n - 1, tup[l], rest);
        }
        rhs += jump / n;
        max_diff = std::max(max_diff, std::abs(lhs - rhs));
        rep.max_abs_lhs = std::max(rep.max_abs_lhs, std::abs(lhs));
    }
    rep.max_residual = rep.max_abs_lhs > 0 ? max_diff / rep.max_abs_lhs : max_diff;
    return rep;
}

struct ScalingFit {
    double slope = 0;              // log-log slope
    std::vector<double> spacings;  // t - s
    std::vector<double> values;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// ‖(b1_{[0,t]})^{⊗n} - (b1_{[0,s]})^{⊗n}‖ along a ladder of (s,t) node pairs
/// and the fitted exponent of its scaling in t - s.
inline ScalingFit tensor_power_increment(const LambdaElement& b, int n,
                                         const std::vector<std::pair<double, double>>& pairs) {
    require(pairs.size() >= 2, "tensor_power_increment: need at least two pairs");
    ScalingFit fit;
    const auto K = space_constants(b.order);
    for (auto [s, t] : pairs) {
        require(t > s, "tensor_power_increment: need s < t");
        const auto A = restrict(b, t), B = restrict(b, s);
        const double aa = inner(A, A, K), bb = inner(B, B, K);
        const auto D = combine(1.0, A, -1.0, B);
        const double dd = inner(D, D, K);
        const double ab = 0.5 * (aa + bb - dd);
        double v = n == 1 ? dd : std::pow(aa, n) + std::pow(bb, n) - 2.0 * std::pow(ab, n);
        fit.spacings.push_back(t - s);
        fit.values.push_back(std::sqrt(std::max(v, 0.0)));
    }
    fit.slope = loglog_slope(fit.spacings, fit.values);
    return fit;
}

struct HolderEstimate {
    double delta = 0;  // slope / q
    ScalingFit fit;    // E|X_t - X_s|^q against t - s
};

/// Monte Carlo E|X_t - X_s|^q over a ladder of node pairs; δ = slope / q.
inline HolderEstimate holder_exponent_estimate(const SampledFunction& a, const LambdaElement& b, const EtaSpec& eta,
                                               int n_max, double q,
                                               const std::vector<std::pair<double, double>>& pairs,
                                               const FbmSampler& sampler, std::size_t n_paths, std::uint64_t seed) {
    require(pairs.size() >= 4, "holder_exponent_estimate: need at least 4 ladder points");
    require(q >= 1.0, "holder_exponent_estimate: q must be >= 1");
    std::map<double, ChaosSolution> slices;
    for (auto [s, t] : pairs) {
        require(t > s, "holder_exponent_estimate: need s < t");
        for (double x : {s, t})
            if (!slices.count(x)) slices.emplace(x, build_kernels(a, b, eta, x, n_max));
    }
    std::vector<std::vector<double>> acc(n_paths, std::vector<double>(pairs.size()));
    parallel_for(n_paths, [&](std::size_t i) {
        const auto path = sampler.sample(seed, i);
        std::map<double, double> X;
        for (auto& [t, S] : slices) X[t] = evaluate_solution(S, path).value;
        for (std::size_t k = 0; k < pairs.size(); ++k)
            acc[i][k] = std::pow(std::abs(X[pairs[k].second] - X[pairs[k].first]), q);
    });
    HolderEstimate est;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        double m = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) m += acc[i][k];
        est.fit.spacings.push_back(pairs[k].second - pairs[k].first);
        est.fit.values.push_back(m / double(n_paths));
    }
    est.fit.slope = loglog_slope(est.fit.spacings, est.fit.values);
    est.delta = est.fit.slope / q;
    return est;
}

}  // namespace frachaos
