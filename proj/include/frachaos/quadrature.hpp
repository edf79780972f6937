#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "errors.hpp"

namespace frachaos {

/// Nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<double> x, w;
};

namespace detail {

// Golub-Welsch for weight (1-x)^a (1+x)^b, a, b > -1.
inline QuadratureRule golub_welsch_jacobi(int n, double a, double b) {
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    const double ab = a + b;
    for (int k = 0; k < n; ++k) {
        if (k == 0) {
            diag(k) = (b - a) / (ab + 2.0);
        } else {
            const double s = 2.0 * k + ab;
            diag(k) = (b * b - a * a) / (s * (s + 2.0));
        }
    }
    for (int k = 1; k < n; ++k) {
        double beta;
        if (k == 1) {
            beta = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
        } else {
            const double s = 2.0 * k + ab;
            beta = 4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
        }
        sub(k - 1) = std::sqrt(beta);
    }
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                                std::lgamma(ab + 2.0));
    QuadratureRule r;
    r.x.resize(n);
    r.w.resize(n);
    if (n == 1) {
        r.x[0] = diag(0);
        r.w[0] = mu0;
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    for (int k = 0; k < n; ++k) {
        r.x[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        r.w[k] = mu0 * v0 * v0;
    }
    return r;
}

}  // namespace detail

/// Gauss-Jacobi rule for weight (1-x)^a (1+x)^b on [-1,1]; cached, thread-safe.
inline const QuadratureRule& gauss_jacobi(int n, double a, double b) {
    require(n >= 1 && n <= 200, "gauss_jacobi: n out of range");
    require(a > -1.0 && b > -1.0, "gauss_jacobi: exponents must exceed -1");
    static std::mutex mu;
    static std::map<std::tuple<int, double, double>, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(n, a, b);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, detail::golub_welsch_jacobi(n, a, b)).first;
    return it->second;
}

inline const QuadratureRule& gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

/// ∫_lo^hi (u-lo)^e_lo (hi-u)^e_hi g(u) du by an n-point Gauss-Jacobi rule.
template <class G>
double integrate_jacobi(double lo, double hi, double e_lo, double e_hi, G&& g, int n = 16) {
    const auto& r = gauss_jacobi(n, e_hi, e_lo);
    const double half = 0.5 * (hi - lo);
    const double scale = std::pow(half, 1.0 + e_lo + e_hi);
    double s = 0.0;
    for (std::size_t k = 0; k < r.x.size(); ++k) s += r.w[k] * g(lo + (r.x[k] + 1.0) * half);
    return s * scale;
}

/// Plain Gauss-Legendre on [lo, hi].
template <class G>
double integrate_legendre(double lo, double hi, G&& g, int n = 16) {
    return integrate_jacobi(lo, hi, 0.0, 0.0, std::forward<G>(g), n);
}

/// b^p - a^p without cancellation when b is close to a (0 < a <= b).
inline double pow_diff(double a, double b, double p) {
    if (a <= 0.0) return std::pow(b, p);
    return std::pow(a, p) * std::expm1(p * std::log1p((b - a) / a));
}

/// Exponents of a local expansion F(r) ~ Σ c_γ r^γ, sorted, near-duplicates merged.
inline std::vector<double> merge_exponents(std::vector<double> e, double tol = 0.05) {
    std::sort(e.begin(), e.end());
    std::vector<double> out;
    for (double g : e)
        if (out.empty() || g - out.back() > tol) out.push_back(g);
    return out;
}

/// Generic exponent set for products of two Lambda representatives near a
/// breakpoint: r^{-α}·(smooth + r^α terms) squared.
inline std::vector<double> product_exponents(double alpha) {
    return merge_exponents(
        {-2 * alpha, -alpha, 0.0, alpha, 2 * alpha, 1 - 2 * alpha, 1 - alpha, 1.0});
}

namespace detail {

inline double zeta_neg(double g) {
    // ζ(-γ); ζ(0) = -1/2 exactly
    if (g == 0.0) return -0.5;
    return boost::math::zeta(-g);
}

// Fit F(k h) ≈ Σ c_i k^{γ_i}, k = 1..K, and return Σ ζ(-γ_i) c_i.
inline double endpoint_correction(std::span<const double> samples, std::span<const double> exps) {
    const int K = static_cast<int>(samples.size());
    const int m = std::min<int>(static_cast<int>(exps.size()), K - 1);
    if (m <= 0) return 0.0;
    Eigen::MatrixXd A(K, m);
    Eigen::VectorXd y(K);
    for (int k = 0; k < K; ++k) {
        y(k) = samples[k];
        for (int i = 0; i < m; ++i) A(k, i) = std::pow(double(k + 1), exps[i]);
    }
    Eigen::VectorXd scale = A.colwise().norm().transpose();
    for (int i = 0; i < m; ++i) A.col(i) /= scale(i);
    Eigen::VectorXd c = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    double corr = 0.0;
    for (int i = 0; i < m; ++i) corr += zeta_neg(exps[i]) * c(i) / scale(i);
    return corr;
}

}  // namespace detail

/// ∫ of F over [0, n h] from nodal samples F[0..n], where F may carry
/// algebraic endpoint singularities r^γ at either end (γ > -1). Endpoint
/// values F[0], F[n] are never used. Interior nodes get weight h and each
/// end receives the generalized Euler-Maclaurin (Navot) correction with
/// coefficients fitted on the `fit` nodes nearest to it.
inline double corrected_trapezoid(std::span<const double> F, double h, std::span<const double> exps,
                                  int fit = 10) {
    const int n = static_cast<int>(F.size()) - 1;
    if (n < 2) {
        // one cell, both ends unknown: midpoint of extrapolated ends is all we have
        return n == 1 ? 0.5 * h * (F[0] + F[1]) : 0.0;
    }
    double s = 0.0;
    for (int k = 1; k < n; ++k) s += F[k];
    const int interior = n - 1;
    const int K = std::min(fit, interior / 2);
    if (K < 2) {
        // too short for a fit: treat the two end half-cells with the nearest interior value
        return h * (s + 0.5 * (F[1] + F[n - 1]));
    }
    std::vector<double> left(K), right(K);
    for (int k = 0; k < K; ++k) {
        left[k] = F[1 + k];
        right[k] = F[n - 1 - k];
    }
    s -= detail::endpoint_correction(left, exps);
    s -= detail::endpoint_correction(right, exps);
    return h * s;
}

}  // namespace frachaos
