#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "fraccalc.hpp"
#include "grid.hpp"
#include "quadrature.hpp"

namespace frachaos {

/// C_H and the order it belongs to. The isometry ⟨1_t,1_s⟩ = R_H(t,s) fixes
/// C_H = 2H Γ(H+1/2)^2 / ((1-2H) B(1-2H, H+1/2)).
struct SpaceConstants {
    double c_h;
    FracOrder alpha;
    double hurst;
};

inline SpaceConstants space_constants(FracOrder order) {
    const double H = order.hurst();
    const double g = std::tgamma(H + 0.5);
    const double c = 2.0 * H * g * g / ((1.0 - 2.0 * H) * boost::math::beta(1.0 - 2.0 * H, H + 0.5));
    return {c, order, H};
}

/// An element f of the Lambda space kept together with its representative φ.
/// `breakpoints` lists nodes where φ may blow up like a power (0, T, restriction
/// points); stored φ values there are finite placeholders and never integrated.
struct LambdaElement {
    SampledFunction phi;
    SampledFunction f;
    FracOrder order;
    double p_hint = 2.0;
    std::vector<std::size_t> breakpoints;
    std::optional<MarchaudReport> membership;

    LambdaElement(SampledFunction phi_, SampledFunction f_, FracOrder o, double p = 2.0,
                  std::vector<std::size_t> bps = {})
        : phi(std::move(phi_)), f(std::move(f_)), order(o), p_hint(p), breakpoints(std::move(bps)) {
        require(phi.grid() == f.grid(), "LambdaElement: phi and f live on different grids");
        std::sort(breakpoints.begin(), breakpoints.end());
        breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    }

    const Grid& grid() const { return phi.grid(); }
};

inline LambdaElement zero_element(const Grid& g, FracOrder o) {
    return LambdaElement(SampledFunction(g, 0.0), SampledFunction(g, 0.0), o);
}

/// a·x + b·y.
inline LambdaElement combine(double a, const LambdaElement& x, double b, const LambdaElement& y) {
    require(x.grid() == y.grid(), "combine: grid mismatch");
    require(x.order == y.order, "combine: order mismatch");
    std::vector<std::size_t> bps = x.breakpoints;
    bps.insert(bps.end(), y.breakpoints.begin(), y.breakpoints.end());
    return LambdaElement(x.phi * a + y.phi * b, x.f * a + y.f * b, x.order,
                         std::min(x.p_hint, y.p_hint), std::move(bps));
}

inline LambdaElement scaled(const LambdaElement& x, double a) {
    LambdaElement r(x.phi * a, x.f * a, x.order, x.p_hint, x.breakpoints);
    r.membership = x.membership;
    return r;
}

namespace detail {

// cells [0, kNearCells) use the exact u^{-α} weight; beyond, nodal interpolation
// of u^{-α}·(function) is accurate to ~h²/u² and Toeplitz moments take over
constexpr std::size_t kNearCells = 512;

inline std::size_t near_limit(const Grid& g) { return std::min(g.n_cells(), kNearCells); }

inline bool has(const std::vector<std::size_t>& v, std::size_t k) {
    return std::binary_search(v.begin(), v.end(), k);
}

// φ on a cell whose right end b is a breakpoint: c (t_b - s)^{-α} + d, matched at
// the two nodes left of b.
struct PowerModel {
    double c = 0, d = 0;
};

inline PowerModel fit_left_power(const std::vector<double>& phi, std::size_t b, double h, double a) {
    PowerModel m;
    if (b < 2) {
        m.d = phi[b - 1];
        return m;
    }
    const double r1 = std::pow(h, -a), r2 = std::pow(2 * h, -a);
    m.c = (phi[b - 1] - phi[b - 2]) / (r1 - r2);
    m.d = phi[b - 1] - m.c * r1;
    return m;
}

inline double extrapolate_left(const std::vector<double>& v, std::size_t k) {
    // value at node k from nodes k+1, k+2
    if (k + 2 < v.size()) return 2 * v[k + 1] - v[k + 2];
    return k + 1 < v.size() ? v[k + 1] : 0.0;
}

inline double extrapolate_right(const std::vector<double>& v, std::size_t k) {
    if (k >= 2) return 2 * v[k - 1] - v[k - 2];
    return k >= 1 ? v[k - 1] : 0.0;
}

// f(u_j) = u_j^α/Γ(α) ∫_{u_j}^T s^{-α} φ(s)(s-u_j)^{α-1} ds for 1 <= j < N.
inline std::vector<double> forward_values(const std::vector<double>& phi, const Grid& g, double a,
                                          const std::vector<std::size_t>& bps) {
    const std::size_t N = g.n_cells(), K0 = near_limit(g);
    const double h = g.spacing();
    std::vector<double> psi(N + 1, 0.0);
    for (std::size_t c = 1; c <= N; ++c) psi[c] = std::pow(g.node(c), -a) * phi[c];
    const auto W = toeplitz_moments(N, h, a - 1.0);

    // cells whose right end is a breakpoint get the power model
    std::vector<char> model(N, 0);
    std::vector<PowerModel> pm(N);
    for (std::size_t b : bps)
        if (b >= 2 && b <= N) {
            model[b - 1] = 1;
            pm[b - 1] = fit_left_power(phi, b, h, a);
        }

    std::vector<double> out(N + 1, 0.0);
    for (std::size_t j = 1; j < N; ++j) {
        const double u = g.node(j);
        const double e_lo_j = a - 1.0;
        auto kern = [&](double s) { return std::pow(s, -a) * std::pow(s - u, a - 1.0); };
        double acc = 0.0;
        for (std::size_t c = j; c < N; ++c) {
            const bool near = c < K0;
            if (!near && !model[c]) continue;
            const double lo = g.node(c), hi = g.node(c + 1);
            if (!near) {
                // undo the Toeplitz contribution added below
                const std::size_t m = c - j;
                acc -= psi[c] * W.left[m] + psi[c + 1] * W.right[m];
            }
            if (model[c]) {
                const auto& M = pm[c];
                const double e_lo = (c == j) ? e_lo_j : 0.0;
                auto smooth = [&](double s) {
                    return std::pow(s, -a) * (c == j ? 1.0 : std::pow(s - u, a - 1.0));
                };
                acc += M.c * integrate_jacobi(lo, hi, e_lo, -a, smooth, 16);
                acc += M.d * integrate_jacobi(lo, hi, e_lo, 0.0, smooth, 16);
            } else if (c == j) {
                const double p0 = phi[c], p1 = phi[c + 1];
                acc += integrate_jacobi(lo, hi, e_lo_j, 0.0, [&](double s) {
                    return std::pow(s, -a) * (p0 + (p1 - p0) * (s - lo) / h);
                });
            } else {
                const double p0 = phi[c], p1 = phi[c + 1];
                acc += integrate_legendre(lo, hi, [&](double s) {
                    return kern(s) * (p0 + (p1 - p0) * (s - lo) / h);
                });
            }
        }
        for (std::size_t c = std::max(j, K0); c < N; ++c) {
            const std::size_t m = c - j;
            acc += psi[c] * W.left[m] + psi[c + 1] * W.right[m];
        }
        out[j] = std::pow(u, a) / std::tgamma(a) * acc;
    }
    out[0] = has(bps, 0) ? out[1] : 0.0;
    out[N] = has(bps, N) ? out[N - 1] : 0.0;
    return out;
}

}  // namespace detail

/// Element with prescribed representative φ (assumed regular, no breakpoints).
inline LambdaElement from_phi(const SampledFunction& phi, FracOrder order, double p_hint = 2.0) {
    check_finite(phi, "from_phi");
    auto f = detail::forward_values(phi.values(), phi.grid(), order.alpha(), {});
    return LambdaElement(phi, SampledFunction(phi.grid(), std::move(f)), order, p_hint);
}

/// u^α I^α_{T-}(s^{-α} φ)(u) for an element, honouring its breakpoints.
inline SampledFunction forward_map(const LambdaElement& e) {
    return {e.grid(), detail::forward_values(e.phi.values(), e.grid(), e.order.alpha(), e.breakpoints)};
}

namespace detail {

// G = u^{-α} f behaves like G(T) + c(T-u)^α + e(T-u) at T for images of the forward
// map; that model is fitted on the last three nodes and differentiated exactly, the
// discrete Marchaud sum only sees the remainder.
inline std::vector<double> inverse_values(const SampledFunction& f, double a) {
    const Grid& g = f.grid();
    const std::size_t N = g.n_cells(), K0 = near_limit(g);
    const double h = g.spacing(), T = g.horizon();
    const auto& v = f.values();
    std::vector<double> G(N + 1, 0.0);
    for (std::size_t c = 1; c <= N; ++c) G[c] = std::pow(g.node(c), -a) * v[c];

    const double GT = G[N], r1 = G[N - 1] - GT, r2 = G[N - 2] - GT;
    const double c_pow = (2.0 * r1 - r2) / (std::pow(h, a) * (2.0 - std::pow(2.0, a)));
    const double c_lin = (r1 - c_pow * std::pow(h, a)) / h;
    auto model = [&](double u) {
        const double d = std::max(T - u, 0.0);
        return GT + c_pow * std::pow(d, a) + c_lin * d;
    };
    std::vector<double> R(N + 1, 0.0);
    for (std::size_t c = 1; c <= N; ++c) R[c] = G[c] - model(g.node(c));

    const auto W = toeplitz_moments(N, h, -1.0 - a);
    const double b0 = std::pow(h, -a) / (1.0 - a);
    const double ga = 1.0 / std::tgamma(1.0 - a);
    const double g_pow = std::tgamma(1.0 + a), g_lin = 1.0 / std::tgamma(2.0 - a);

    std::vector<double> phi(N + 1, 0.0);
    for (std::size_t j = 1; j < N; ++j) {
        const double s = g.node(j), Ms = model(s);
        double acc = 0.0;
        for (std::size_t c = j; c < std::min(K0, N); ++c) {
            const double lo = g.node(c);
            const double f0 = v[c], slope = (v[c + 1] - v[c]) / h;
            if (c == j) {
                // (G(s) - G(u))/(u-s) is smooth; weight (u-s)^{-α}
                acc += integrate_jacobi(lo, lo + h, -a, 0.0, [&](double u) {
                    const double d = u - s;
                    const double dg = -pow_diff(s, u, -a) * f0 - std::pow(u, -a) * slope * d;
                    return (dg - (Ms - model(u))) / d;
                });
            } else {
                acc += integrate_legendre(lo, lo + h, [&](double u) {
                    const double gu = std::pow(u, -a) * (f0 + slope * (u - lo));
                    return (G[j] - gu - (Ms - model(u))) * std::pow(u - s, -1.0 - a);
                });
            }
        }
        for (std::size_t c = std::max(j, K0); c < N; ++c) {
            const std::size_t m = c - j;
            if (m == 0) acc += (R[j] - R[j + 1]) * b0;
            else acc += (R[j] - R[c]) * W.left[m] + (R[j] - R[c + 1]) * W.right[m];
        }
        const double d = T - s;
        const double D = ga * ((R[j] + GT) * std::pow(d, -a) + a * acc) + c_pow * g_pow + c_lin * g_lin * std::pow(d, 1.0 - a);
        phi[j] = std::pow(s, a) * D;
    }
    phi[0] = extrapolate_left(phi, 0);
    phi[N] = phi[N - 1];
    return phi;
}

}  // namespace detail

/// φ(s) = s^α D^α_{T-}(u^{-α} f)(s). Throws NotInSpace when the Marchaud tail
/// diagnostic on f (in L^{p_hint}) does not contract.
inline LambdaElement to_phi(const SampledFunction& f, FracOrder order, double p_hint = 2.0) {
    check_finite(f, "to_phi");
    auto rep = marchaud_tail_convergence(f, order, p_hint);
    if (!rep.converges) throw NotInSpace("to_phi: Marchaud tail does not contract");
    const std::size_t N = f.grid().n_cells();
    LambdaElement e(SampledFunction(f.grid(), detail::inverse_values(f, order.alpha())), f, order, p_hint,
                    {0, N});
    e.membership = std::move(rep);
    return e;
}

/// σ on [0,T]. φ of the constant 1 is computed once per (grid, α) and scaled.
inline LambdaElement constant_element(const Grid& g, FracOrder order, double value) {
    static std::mutex mu;
    static std::map<std::pair<std::pair<double, std::size_t>, double>, std::shared_ptr<LambdaElement>> cache;
    auto key = std::make_pair(std::make_pair(g.horizon(), g.n_cells()), order.alpha());
    std::shared_ptr<LambdaElement> one;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) one = it->second;
    }
    if (!one) {
        one = std::make_shared<LambdaElement>(to_phi(SampledFunction(g, 1.0), order));
        std::lock_guard<std::mutex> lock(mu);
        cache.emplace(key, one);
    }
    return scaled(*one, value);
}

/// f·1_{[0,t]} for a grid node t:
/// φ_new(s) = 1_{[0,t]}(s)[φ(s) + α s^α/Γ(1-α) ∫_t^T u^{-α} f(u)(u-s)^{-1-α} du].
/// The stored f is zero from node t on (half-open support), which makes the
/// forward Riemann sum of an indicator telescope to B_t.
inline LambdaElement restrict(const LambdaElement& e, double t) {
    const Grid& g = e.grid();
    require(t >= 0.0 && t <= g.horizon(), "restrict: t must lie in [0,T]");
    auto Jo = g.node_index(t);
    require(Jo.has_value(), "restrict: t must be a grid node");
    const std::size_t J = *Jo, N = g.n_cells();
    if (J == N) return e;
    if (J == 0) return zero_element(g, e.order);

    const double a = e.order.alpha(), h = g.spacing();
    const std::size_t K0 = detail::near_limit(g);
    const auto& fv = e.f.values();
    std::vector<double> G(N + 1, 0.0);
    for (std::size_t c = 1; c <= N; ++c) G[c] = std::pow(g.node(c), -a) * fv[c];
    const auto W = toeplitz_moments(N, h, -1.0 - a);
    const double pre = a / std::tgamma(1.0 - a);

    std::vector<double> phi(N + 1, 0.0);
    const auto& old = e.phi.values();
    for (std::size_t j = 1; j < J; ++j) {
        const double s = g.node(j);
        double tail = 0.0;
        for (std::size_t c = J; c < std::min(K0, N); ++c) {
            const double lo = g.node(c), f0 = fv[c], slope = (fv[c + 1] - fv[c]) / h;
            tail += integrate_legendre(lo, lo + h, [&](double u) {
                return std::pow(u, -a) * (f0 + slope * (u - lo)) * std::pow(u - s, -1.0 - a);
            });
        }
        for (std::size_t c = std::max(J, K0); c < N; ++c) {
            const std::size_t m = c - j;
            tail += G[c] * W.left[m] + G[c + 1] * W.right[m];
        }
        phi[j] = old[j] + pre * std::pow(s, a) * tail;
    }
    std::vector<std::size_t> bps;
    for (std::size_t b : e.breakpoints)
        if (b < J) bps.push_back(b);
    bps.push_back(J);
    phi[0] = detail::has(bps, 0) ? detail::extrapolate_left(phi, 0) : old[0];
    phi[J] = detail::extrapolate_right(phi, J);

    std::vector<double> fn(N + 1, 0.0);
    for (std::size_t k = 0; k < J; ++k) fn[k] = fv[k];
    LambdaElement r(SampledFunction(g, std::move(phi)), SampledFunction(g, std::move(fn)), e.order,
                    e.p_hint, std::move(bps));
    r.membership = e.membership;
    return r;
}

/// 1_{[0,t]}: the constant 1 run through to_phi, then restricted at t.
inline LambdaElement indicator_element(const Grid& g, FracOrder order, double t) {
    require(t > 0.0 && t <= g.horizon(), "indicator_element: t must lie in (0,T]");
    return restrict(constant_element(g, order, 1.0), t);
}

namespace detail {

inline std::vector<std::size_t> segment_ends(const LambdaElement& x, const LambdaElement& y) {
    std::set<std::size_t> s(x.breakpoints.begin(), x.breakpoints.end());
    s.insert(y.breakpoints.begin(), y.breakpoints.end());
    s.insert(0);
    s.insert(x.grid().n_cells());
    return {s.begin(), s.end()};
}

// The endpoint fits of the corrected trapezoid need a few hundred cells to
// settle (‖1_t‖² is off by 1e-3 at 64 cells, 1e-5 at 256). Segments shorter
// than kTrapezoidMin always go through a fitted local model; up to kModelMax
// the model is preferred whenever it reproduces the nodes to kModelResidual.
inline constexpr std::size_t kTrapezoidMin = 64;
inline constexpr std::size_t kModelMax = 2048;
inline constexpr double kModelResidual = 1e-6;
inline constexpr int kMaxDegree = 24;

// φ on one segment as a least-squares combination of r^{-α}(L-r)^{-α}-type
// endpoint powers and Legendre polynomials, fitted to the interior nodes.
struct SegmentModel {
    double L = 0, a = 0;
    std::vector<int> kinds;  // 0: product weight, 1/2: lo/hi power (with exponent), 3: Legendre degree
    std::vector<double> exps;
    Eigen::VectorXd c;
    bool sing_lo = false, sing_hi = false;
    double residual = 0;  // max nodal misfit relative to max |φ| on the segment
    int max_degree = 0;

    void basis_row(double r, std::vector<double>& out) const {
        std::vector<double>& P = legendre_;
        P.assign(max_degree + 1, 1.0);
        const double x = 2.0 * r / L - 1.0;
        if (max_degree >= 1) P[1] = x;
        for (int d = 1; d < max_degree; ++d) P[d + 1] = ((2 * d + 1) * x * P[d] - d * P[d - 1]) / (d + 1);
        out.resize(kinds.size());
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            switch (kinds[i]) {
                case 0: out[i] = std::pow(r, sing_lo ? -a : 0.0) * std::pow(L - r, sing_hi ? -a : 0.0); break;
                case 1: out[i] = std::pow(r, exps[i]); break;
                case 2: out[i] = std::pow(L - r, exps[i]); break;
                default: out[i] = P[int(exps[i])];
            }
        }
    }
    double operator()(double r) const {
        basis_row(r, row_);
        double s = 0.0;
        for (std::size_t i = 0; i < kinds.size(); ++i) s += c(i) * row_[i];
        return s;
    }

private:
    mutable std::vector<double> legendre_, row_;
};

inline SegmentModel fit_segment(const LambdaElement& e, std::size_t lo, std::size_t hi) {
    SegmentModel M;
    const double h = e.grid().spacing();
    M.a = e.order.alpha();
    M.L = double(hi - lo) * h;
    M.sing_lo = has(e.breakpoints, lo);
    M.sing_hi = has(e.breakpoints, hi);
    auto add = [&](int kind, double ex) { M.kinds.push_back(kind), M.exps.push_back(ex); };
    const double a = M.a;
    if (M.sing_lo || M.sing_hi) add(0, 0.0);
    if (M.sing_lo && M.sing_hi) add(1, -a), add(2, -a);
    add(3, 0.0);
    const double powers[3] = {a, 1.0 - a, 1.0 + a};
    for (int d = 0; d < 3; ++d) {
        if (M.sing_lo) add(1, powers[d]);
        if (M.sing_hi) add(2, powers[d]);
        add(3, d + 1.0);
    }
    add(3, 4.0);
    add(3, 5.0);
    add(3, 6.0);
    const int ni = int(hi - lo) - 1;
    // Regular stretches need more than degree 6; add degrees while every column keeps 3 nodes.
    // Not next to a breakpoint: there a tight nodal fit can still miss the singular
    // structure (‖1_t‖ pairings drift to 1e-4 at H = 0.1).
    if (!M.sing_lo && !M.sing_hi)
        for (int d = 7; d <= kMaxDegree && 3 * int(M.kinds.size() + 1) <= ni; ++d) add(3, double(d));
    const int m = std::min<int>(int(M.kinds.size()), ni);
    M.kinds.resize(m);
    M.exps.resize(m);
    for (int j = 0; j < m; ++j)
        if (M.kinds[j] == 3) M.max_degree = std::max(M.max_degree, int(M.exps[j]));
    Eigen::MatrixXd A(ni, m);
    Eigen::VectorXd y(ni);
    const auto& v = e.phi.values();
    std::vector<double> row;
    for (int i = 0; i < ni; ++i) {
        const double r = (i + 1) * h;
        y(i) = v[lo + 1 + i];
        M.basis_row(r, row);
        for (int j = 0; j < m; ++j) A(i, j) = row[j];
    }
    Eigen::VectorXd sc = A.colwise().norm().transpose();
    for (int j = 0; j < m; ++j)
        if (sc(j) > 0) A.col(j) /= sc(j);
    M.c = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    const Eigen::VectorXd fitted = A * M.c;
    for (int j = 0; j < m; ++j)
        if (sc(j) > 0) M.c(j) /= sc(j);
    const double ymax = y.cwiseAbs().maxCoeff();
    M.residual = ymax > 0 ? (fitted - y).cwiseAbs().maxCoeff() / ymax : 0.0;
    return M;
}

// ∫_0^L F with possible r^{γ_lo}, (L-r)^{γ_hi} endpoint behaviour: dyadic panels
// graded towards both ends, Gauss-Jacobi on the innermost pieces.
template <class F>
double graded_integral(double L, F&& fn, double g_lo, double g_hi) {
    double s = 0.0;
    for (int side = 0; side < 2; ++side) {
        const double g = side ? g_hi : g_lo;
        auto G = [&](double r) { return side ? fn(L - r) : fn(r); };
        double top = 0.5 * L;
        for (int k = 0; k < 30; ++k) {
            s += integrate_legendre(0.5 * top, top, G, 16);
            top *= 0.5;
        }
        s += integrate_jacobi(0.0, top, g, 0.0, [&](double r) { return G(r) * std::pow(r, -g); }, 16);
    }
    return s;
}

inline double model_pairing(const SegmentModel& mx, const SegmentModel& my) {
    const double a = mx.a;
    const double g_lo = -a * (mx.sing_lo + my.sing_lo), g_hi = -a * (mx.sing_hi + my.sing_hi);
    return graded_integral(mx.L, [&](double r) { return mx(r) * my(r); }, g_lo, g_hi);
}

}  // namespace detail

/// ∫_0^T φ_x φ_y, split at breakpoints: each segment either through a fitted
/// singular model or by the singularity-corrected trapezoid (see kModelMax).
inline double phi_pairing(const LambdaElement& x, const LambdaElement& y) {
    require(x.grid() == y.grid(), "inner: grid mismatch");
    require(x.order == y.order, "inner: order mismatch");
    const auto ends = detail::segment_ends(x, y);
    const auto exps = product_exponents(x.order.alpha());
    const double h = x.grid().spacing();
    const auto &px = x.phi.values(), &py = y.phi.values();
    double total = 0.0;
    std::vector<double> F;
    for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
        F.resize(ends[i + 1] - ends[i] + 1);
        bool zero = true;
        for (std::size_t k = ends[i]; k <= ends[i + 1]; ++k) {
            F[k - ends[i]] = px[k] * py[k];
            if (k != ends[i] && k != ends[i + 1] && F[k - ends[i]] != 0.0) zero = false;
        }
        if (zero) continue;
        const std::size_t len = ends[i + 1] - ends[i];
        if (len < 2) continue;  // no interior node carries information
        if (len <= detail::kModelMax) {
            const auto mx = detail::fit_segment(x, ends[i], ends[i + 1]);
            const auto my = detail::fit_segment(y, ends[i], ends[i + 1]);
            if (len < detail::kTrapezoidMin || std::max(mx.residual, my.residual) <= detail::kModelResidual) {
                total += detail::model_pairing(mx, my);
                continue;
            }
        }
        total += corrected_trapezoid(F, h, exps);
    }
    return total;
}

/// ⟨x, y⟩ = C_H ⟨φ_x, φ_y⟩_{L²}.
inline double inner(const LambdaElement& x, const LambdaElement& y, const SpaceConstants& k) {
    require(k.alpha == x.order, "inner: constants belong to another order");
    return k.c_h * phi_pairing(x, y);
}

inline double inner(const LambdaElement& x, const LambdaElement& y) {
    return inner(x, y, space_constants(x.order));
}

inline double norm(const LambdaElement& x) { return std::sqrt(std::max(0.0, inner(x, x))); }

/// ‖φ‖_{L^p}: trapezoid on each segment, with the half cell next to every
/// segment end integrated as a pure power c·r^{-α} matched at the first node.
inline double phi_lp_norm(const LambdaElement& x, double p) {
    require(p >= 1.0, "phi_lp_norm: p must be >= 1");
    const auto ends = detail::segment_ends(x, x);
    const double h = x.grid().spacing(), a = x.order.alpha();
    require(a * p < 1.0, "phi_lp_norm: need p < 1/alpha");
    const auto& v = x.phi.values();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
        const std::size_t lo = ends[i], hi = ends[i + 1];
        if (hi - lo < 2) {
            s += h * std::pow(std::abs(0.5 * (v[lo] + v[hi])), p);
            continue;
        }
        for (std::size_t k = lo + 1; k < hi; ++k) s += h * std::pow(std::abs(v[k]), p);
        const double end_cell = std::pow(0.5, 1.0 - a * p) / (1.0 - a * p) * h;
        s += end_cell * (std::pow(std::abs(v[lo + 1]), p) + std::pow(std::abs(v[hi - 1]), p));
    }
    return std::pow(s, 1.0 / p);
}

/// C_{α,p',p,t} bounding ‖φ_{f1_{[0,t]}}‖_{p'} by ‖φ_f‖_p; c_pr is the
/// configured norm of I^α: L^p -> L^{p/(1-αp)}.
inline double restriction_constant(FracOrder order, double p_prime, double p, double t, double c_pr) {
    const double a = order.alpha();
    require(2.0 <= p_prime && p_prime < p && p < 1.0 / a,
            "restriction_constant: need 2 <= p' < p < 1/alpha");
    require(t > 0.0, "restriction_constant: t must be positive");
    const double q = p / (p - p_prime * (1.0 - a * p));
    const double x = 1.0 - p_prime * a * q;
    require(x > 0.0, "restriction_constant: 1 - p' alpha q must be positive");
    return std::pow(t, (p - p_prime) / (p_prime * p)) +
           c_pr / std::tgamma(1.0 - a) * std::pow(std::pow(t, x) / x, 1.0 / (p_prime * q));
}

/// g·f for g Hölder of declared order β > α. The Hölder quotient is spot-checked
/// on dyadic node pairs; the product goes through to_phi (which may refuse it).
inline LambdaElement holder_product(const SampledFunction& g, double beta, const LambdaElement& e) {
    const double a = e.order.alpha();
    require(beta > a && beta <= 1.0, "holder_product: need alpha < beta <= 1");
    require(g.grid() == e.grid(), "holder_product: grid mismatch");
    check_finite(g, "holder_product");
    const auto& v = g.values();
    const double h = g.grid().spacing();
    double q = 0.0;
    for (std::size_t d = 1; d < v.size(); d *= 2)
        for (std::size_t k = 0; k + d < v.size(); ++k)
            q = std::max(q, std::abs(v[k + d] - v[k]) / std::pow(d * h, beta));
    require(std::isfinite(q), "holder_product: Hölder quotient is not finite");
    std::vector<double> prod(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) prod[k] = v[k] * e.f[k];
    return to_phi(SampledFunction(g.grid(), std::move(prod)), e.order, e.p_hint);
}

}  // namespace frachaos
