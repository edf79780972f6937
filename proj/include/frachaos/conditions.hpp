#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "chaos.hpp"
#include "errors.hpp"
#include "fraccalc.hpp"
#include "lambda_space.hpp"
#include "permanent.hpp"

namespace frachaos {

struct BoundConstants {
    double B_T_p = 0;    // B_{T,p}
    double B_H_p_t = 0;  // B_{H,p,t} for the supplied b1_{[0,t]}
    double A = 0;
    double B_p = 0;
};

namespace detail {

inline double lp_ratio_power(double a, double p) {
    const double x = p - 2.0 * (1.0 - a * p);
    return std::pow(x / (p - 2.0), x / (2.0 * p));
}

}  // namespace detail

/// The constants driving the kernel bounds. `c_pr` is the norm of
/// I^α: L^p -> L^{p/(1-αp)}.
inline BoundConstants bound_constants(FracOrder order, double p, double T, const SampledFunction& a,
                                      const LambdaElement& b_restricted, double c_pr) {
    const double al = order.alpha();
    require(p > 2.0 && al * p < 1.0, "bound_constants: p must lie in (2, 1/alpha)");
    require(T > 0.0 && c_pr > 0.0, "bound_constants: need T > 0 and a positive operator norm");
    BoundConstants c;
    const double tp = std::pow(T, (p - 2.0) / (2.0 * p)) * detail::lp_ratio_power(al, p) * c_pr;
    c.B_T_p = tp / std::tgamma(1.0 - al);
    c.B_p = tp / al;
    if (std::abs(al / std::tgamma(1.0 - al) * c.B_p - c.B_T_p) > 1e-12 * c.B_T_p)
        throw InvalidData("bound_constants: B_p and B_{T,p} disagree");
    const auto K = space_constants(order);
    const double l2 = std::sqrt(std::max(0.0, phi_pairing(b_restricted, b_restricted)));
    const double lp = phi_lp_norm(b_restricted, p);
    c.B_H_p_t = 1.0 + K.c_h * std::pow(c.B_T_p * lp + l2, 2);
    std::vector<double> absa(a.values());
    for (auto& x : absa) x = std::abs(x);
    const double int_abs = trapezoid(SampledFunction(a.grid(), absa));
    for (auto& x : absa) x *= x;
    const double a_l2 = std::sqrt(trapezoid(SampledFunction(a.grid(), absa)));
    c.A = std::exp(int_abs) * a_l2 * boost::math::beta(al, 0.5 - al) * 2.0 * T / std::tgamma(al);
    return c;
}

struct SupB {
    double value = 1;
    double t_at_sup = 0;
    std::vector<double> t_grid, values;
};

/// sup_t B_{H,p,t} over 64 nodes from 0 to T(1 - 2^{-10}) (floor-snapped).
inline SupB sup_b_constant(FracOrder order, double p, const SampledFunction& a, const LambdaElement& b, double c_pr) {
    const Grid& g = b.grid();
    const double T = g.horizon();
    SupB s;
    s.value = -1;
    for (int i = 0; i < 64; ++i) {
        const double target = T * (1.0 - std::ldexp(1.0, -10)) * i / 63.0;
        const double t = g.node(g.floor_index(target));
        if (!s.t_grid.empty() && t == s.t_grid.back()) continue;
        const auto bt = restrict(b, t);
        const double v = bound_constants(order, p, T, a, bt, c_pr).B_H_p_t;
        s.t_grid.push_back(t);
        s.values.push_back(v);
        if (v > s.value) s.value = v, s.t_at_sup = t;
    }
    return s;
}

/// ‖η̃_k‖ in the k-fold tensor space for k = 0..levels-1 (zero beyond the spec).
inline std::vector<double> eta_level_norms(const EtaSpec& eta, int levels) {
    std::vector<double> out(levels, 0.0);
    if (levels > 0) out[0] = std::abs(eta.eta0);
    for (const auto& [k, terms] : eta.levels) {
        if (k >= levels) continue;
        require(k <= 12, "eta_level_norms: level above 12");
        std::vector<const LambdaElement*> el;
        for (const auto& t : terms)
            for (const auto& f : t.factors) el.push_back(&f);
        const int m = int(el.size());
        Eigen::MatrixXd G(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= i; ++j) G(i, j) = G(j, i) = inner(*el[i], *el[j]);
        Eigen::MatrixXd M(k, k);
        double s = 0.0;
        for (std::size_t p = 0; p < terms.size(); ++p)
            for (std::size_t q = 0; q < terms.size(); ++q) {
                for (int r = 0; r < k; ++r)
                    for (int c = 0; c < k; ++c) M(r, c) = G(int(p) * k + r, int(q) * k + c);
                s += terms[p].coefficient * terms[q].coefficient * permanent(M);
            }
        out[k] = std::sqrt(std::max(0.0, s / factorial(k)));
    }
    return out;
}

/// log ‖η_k‖ as a function of k; -inf marks a vanishing level.
using LogNorms = std::function<double(int)>;

inline LogNorms tabulated_log_norms(std::vector<double> norms) {
    return [v = std::move(norms)](int k) {
        return k < int(v.size()) && v[k] > 0 ? std::log(v[k]) : -INFINITY;
    };
}

/// ‖η_k‖ = C^k / k!.
inline LogNorms exp_growth_log_norms(double C) {
    require(C > 0.0, "exp_growth_log_norms: C must be positive");
    return [C](int k) { return k * std::log(C) - std::lgamma(k + 1.0); };
}

/// ‖η_k‖ = (sup B)^{-k/2} ((k+1)!)^{-1/2}: the borderline sequence.
inline LogNorms critical_log_norms(double b_sup) {
    require(b_sup > 0.0, "critical_log_norms: sup B must be positive");
    return [b_sup](int k) { return -0.5 * k * std::log(b_sup) - 0.5 * std::lgamma(k + 2.0); };
}

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

/// Decay verdict from log terms: vanishing trailing terms pass; the last 5
/// ratios all below 1 pass, all at or above 1 fail.
inline Verdict decay_verdict(const std::vector<double>& log_terms) {
    const std::size_t n = log_terms.size();
    if (n < 6) return Verdict::inconclusive;
    bool tail_zero = true;
    for (std::size_t k = n - 6; k < n; ++k) tail_zero = tail_zero && std::isinf(log_terms[k]) && log_terms[k] < 0;
    if (tail_zero) return Verdict::pass;
    const double one = std::log1p(-1e-9);
    int below = 0, above = 0;
    for (std::size_t k = n - 5; k < n; ++k) {
        const double r = log_terms[k] - log_terms[k - 1];
        if (std::isnan(r)) continue;
        if (r < one) ++below;
        else ++above;
    }
    if (below == 5) return Verdict::pass;
    if (above == 5) return Verdict::fail;
    return Verdict::inconclusive;
}

struct SeriesOptions {
    int levels = 40;          // initial number of terms k = 0..levels-1
    int max_levels = 1 << 16; // doubling stops here
};

struct ConditionReport {
    std::string condition;
    Verdict verdict = Verdict::inconclusive;
    double b_sup = 0;
    double t_at_sup = 0;
    double theta = 0;
    std::optional<bool> exponent_check;
    std::vector<double> log_series_terms;  // natural logs; terms overflow doubles quickly
    std::vector<double> log_partial_sums;
};

namespace detail {

// Terms whose ratios are still falling are recomputed on twice as many levels
// (e.g. C^k/k!-type sequences only start to decay after k ~ C² sup B).
template <class Term>
Verdict adaptive_series(ConditionReport& r, Term&& log_term, const SeriesOptions& opt) {
    require(opt.levels >= 6 && opt.max_levels >= opt.levels, "series: need 6 <= levels <= max_levels");
    std::vector<double> lt;
    int L = opt.levels;
    Verdict v = Verdict::inconclusive;
    while (true) {
        for (int k = int(lt.size()); k < L; ++k) lt.push_back(log_term(k));
        v = decay_verdict(lt);
        if (v == Verdict::pass || L >= opt.max_levels) break;
        const std::size_t n = lt.size();
        const double first = lt[n - 5] - lt[n - 6], last = lt[n - 1] - lt[n - 2];
        if (!(last < first - 1e-12)) break;
        L = std::min(2 * L, opt.max_levels);
    }
    double acc = -INFINITY;
    for (double x : lt) {
        if (x > -INFINITY) acc = acc > x ? acc + std::log1p(std::exp(x - acc)) : x + std::log1p(std::exp(acc - x));
        r.log_partial_sums.push_back(acc);
    }
    r.log_series_terms = std::move(lt);
    return v;
}

}  // namespace detail

/// Σ_k (k+1)! ‖η_k‖² (sup_t B_{H,p̃,t})^k: solvability of the equation.
inline ConditionReport solvability_condition(const LogNorms& eta, const SupB& b_sup, SeriesOptions opt = {}) {
    require(b_sup.value >= 1.0, "solvability_condition: sup B must be >= 1");
    ConditionReport r;
    r.condition = "solvability";
    r.b_sup = b_sup.value;
    r.t_at_sup = b_sup.t_at_sup;
    const double lb = std::log(b_sup.value);
    r.verdict = detail::adaptive_series(
        r, [&](int k) { return std::lgamma(k + 2.0) + 2.0 * eta(k) + k * lb; }, opt);
    return r;
}

/// The Hölder exponent ceiling min((p-2)/2p, α, (1-αp)/p).
inline double holder_exponent_bound(FracOrder order, double p) {
    const double a = order.alpha();
    return std::min({(p - 2.0) / (2.0 * p), a, (1.0 - a * p) / p});
}

/// Σ_k e^{kθ} k^{k/2} ‖η_k‖ together with (1+e^{2θ})·min(...) > 1: existence of a
/// continuous version. A failed exponent check fails the report.
inline ConditionReport continuity_condition(const LogNorms& eta, double theta, FracOrder order, double p,
                                            SeriesOptions opt = {}) {
    require(p > 2.0 && order.alpha() * p < 1.0, "continuity_condition: p must lie in (2, 1/alpha)");
    require(std::isfinite(theta), "continuity_condition: theta must be finite");
    ConditionReport r;
    r.condition = "continuity";
    r.theta = theta;
    r.exponent_check = (1.0 + std::exp(2.0 * theta)) * holder_exponent_bound(order, p) > 1.0;
    const auto v = detail::adaptive_series(
        r, [&](int k) { return k * theta + (k ? 0.5 * k * std::log(double(k)) : 0.0) + eta(k); }, opt);
    r.verdict = *r.exponent_check ? v : Verdict::fail;
    return r;
}

/// Structured text, verdict line first.
inline std::string format_report(const ConditionReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "verdict = " << to_string(r.verdict) << '\n';
    os << "condition = " << r.condition << '\n';
    if (r.condition == "solvability") {
        os << "b_sup = " << r.b_sup << '\n';
        os << "t_at_sup = " << r.t_at_sup << '\n';
    } else {
        os << "theta = " << r.theta << '\n';
        os << "exponent_check = " << (r.exponent_check.value_or(false) ? "true" : "false") << '\n';
    }
    auto list = [&](const char* name, const std::vector<double>& v) {
        os << name << " =";
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : " ") << v[i];
        os << '\n';
    };
    os << "levels = " << r.log_series_terms.size() << '\n';
    list("log_series_terms", r.log_series_terms);
    list("log_partial_sums", r.log_partial_sums);
    return os.str();
}

}  // namespace frachaos
