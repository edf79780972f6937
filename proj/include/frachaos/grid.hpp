#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace frachaos {

/// Uniform partition 0 = t_0 < ... < t_N = T.
class Grid {
public:
    Grid() = default;
    Grid(double horizon, std::size_t n_cells) : horizon_(horizon), n_(n_cells) {}

    double horizon() const { return horizon_; }
    std::size_t n_cells() const { return n_; }
    std::size_t size() const { return n_ + 1; }
    double spacing() const { return horizon_ / double(n_); }
    double node(std::size_t k) const {
        return k >= n_ ? horizon_ : horizon_ * double(k) / double(n_);
    }
    std::vector<double> nodes() const {
        std::vector<double> t(size());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = node(k);
        return t;
    }
    /// Index of the node at t, if t sits on the grid (to 1e-9 of a cell).
    std::optional<std::size_t> node_index(double t) const {
        if (!(t >= -1e-9 * spacing() && t <= horizon_ + 1e-9 * spacing())) return std::nullopt;
        const double k = std::round(t / spacing());
        if (std::abs(t - node(std::size_t(k))) > 1e-9 * spacing()) return std::nullopt;
        return std::size_t(k);
    }
    /// Largest node index with t_k <= t.
    std::size_t floor_index(double t) const {
        if (t <= 0) return 0;
        auto k = std::size_t(std::floor(t / spacing() + 1e-9));
        return std::min(k, n_);
    }

    bool operator==(const Grid& o) const { return horizon_ == o.horizon_ && n_ == o.n_; }
    bool operator!=(const Grid& o) const { return !(*this == o); }

private:
    double horizon_ = 1.0;
    std::size_t n_ = 8;
};

inline Grid make_grid(double horizon, std::int64_t n_cells) {
    require(std::isfinite(horizon) && horizon > 0.0, "make_grid: horizon must be positive");
    require(n_cells >= 8, "make_grid: n_cells must be at least 8");
    return Grid(horizon, std::size_t(n_cells));
}

/// Node values with piecewise-linear interpolation.
class SampledFunction {
public:
    SampledFunction() = default;
    SampledFunction(Grid g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
        if (v_.size() != grid_.size())
            throw InvalidArgument("SampledFunction: expected " + std::to_string(grid_.size()) +
                                  " values, got " + std::to_string(v_.size()));
        for (double x : v_)
            if (!std::isfinite(x)) throw InvalidData("SampledFunction: non-finite sample");
    }
    SampledFunction(Grid g, double c) : SampledFunction(g, std::vector<double>(g.size(), c)) {}

    template <class F>
    static SampledFunction from(Grid g, F&& fn) {
        std::vector<double> v(g.size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = fn(g.node(k));
        return SampledFunction(g, std::move(v));
    }

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return v_; }
    std::size_t size() const { return v_.size(); }
    double operator[](std::size_t k) const { return v_[k]; }

    /// Linear interpolation; clamps outside [0,T].
    double at(double x) const {
        const double h = grid_.spacing();
        if (x <= 0) return v_.front();
        if (x >= grid_.horizon()) return v_.back();
        std::size_t c = std::min(std::size_t(x / h), grid_.n_cells() - 1);
        const double th = (x - grid_.node(c)) / h;
        return v_[c] + th * (v_[c + 1] - v_[c]);
    }

    SampledFunction operator*(double a) const {
        auto w = v_;
        for (auto& x : w) x *= a;
        return {grid_, std::move(w)};
    }
    SampledFunction operator+(const SampledFunction& o) const {
        require(grid_ == o.grid_, "SampledFunction: grid mismatch");
        auto w = v_;
        for (std::size_t k = 0; k < w.size(); ++k) w[k] += o.v_[k];
        return {grid_, std::move(w)};
    }
    SampledFunction operator-(const SampledFunction& o) const { return *this + o * -1.0; }

private:
    Grid grid_;
    std::vector<double> v_;
};

/// ∫_a^{a+w} v^e ((a+w-v)/w, (v-a)/w) dv, the moments of v^e against the two
/// linear shape functions of one cell. a >= 0; for a = 0 the left moment needs
/// e > -1 and the right one e > -2.
struct ShapeMoments {
    double left = 0, right = 0;
};

inline ShapeMoments shape_moments(double a, double w, double e) {
    ShapeMoments m;
    if (a <= 0.0) {
        m.right = std::pow(w, e + 1.0) / (e + 2.0);
        m.left = e > -1.0 ? std::pow(w, e + 1.0) / (e + 1.0) - m.right
                          : std::numeric_limits<double>::infinity();
        return m;
    }
    if (a < 2.0 * w) {
        const double b = a + w;
        const double i0 = pow_diff(a, b, e + 1.0) / (e + 1.0);
        const double i1 = pow_diff(a, b, e + 2.0) / (e + 2.0);
        m.right = (i1 - a * i0) / w;
        m.left = i0 - m.right;
        return m;
    }
    // far from the singularity the integrand is smooth; 8 Gauss points are exact to rounding
    const auto& r = gauss_legendre(8);
    for (std::size_t k = 0; k < r.x.size(); ++k) {
        const double th = 0.5 * (r.x[k] + 1.0);
        const double wk = 0.5 * w * r.w[k] * std::pow(a + th * w, e);
        m.left += wk * (1.0 - th);
        m.right += wk * th;
    }
    return m;
}

/// Moments for node-aligned offsets: entry m is shape_moments(m h, h, e).
/// Computed on the unit cell and scaled by h^{e+1}.
struct ToeplitzMoments {
    std::vector<double> left, right;
};

inline ToeplitzMoments toeplitz_moments(std::size_t count, double h, double e) {
    ToeplitzMoments t;
    t.left.resize(count);
    t.right.resize(count);
    const double s = std::pow(h, e + 1.0);
    for (std::size_t m = 0; m < count; ++m) {
        auto sm = shape_moments(double(m), 1.0, e);
        t.left[m] = sm.left * s;
        t.right[m] = sm.right * s;
    }
    return t;
}

inline void check_finite(const SampledFunction& f, const char* who) {
    for (double x : f.values())
        if (!std::isfinite(x)) throw InvalidData(std::string(who) + ": non-finite sample");
}

/// ∫_x^T f(u)(u-x)^{exponent-1} du with f piecewise linear and the weight
/// integrated in closed form cell by cell (exact for piecewise-linear f).
inline double singular_weight_integral(const SampledFunction& f, double x, double exponent) {
    const Grid& g = f.grid();
    require(exponent > 0.0 && exponent < 1.0, "singular_weight_integral: exponent must lie in (0,1)");
    require(x >= 0.0 && x < g.horizon(), "singular_weight_integral: x must lie in [0,T)");
    check_finite(f, "singular_weight_integral");
    const double e = exponent - 1.0;
    const double h = g.spacing();
    std::size_t c = std::min(g.floor_index(x), g.n_cells() - 1);
    double total = 0.0;
    // partial first cell [x, t_{c+1}]
    {
        const double w = g.node(c + 1) - x;
        if (w > 0) {
            auto m = shape_moments(0.0, w, e);
            total += f.at(x) * m.left + f[c + 1] * m.right;
        }
    }
    for (std::size_t k = c + 1; k < g.n_cells(); ++k) {
        auto m = shape_moments(g.node(k) - x, h, e);
        total += f[k] * m.left + f[k + 1] * m.right;
    }
    return total;
}

/// Trapezoid approximation of (∫|f|^p)^{1/p}.
inline double l_p_norm(const SampledFunction& f, double p) {
    require(p >= 1.0, "l_p_norm: p must be >= 1");
    const auto& v = f.values();
    const double h = f.grid().spacing();
    double s = 0.5 * (std::pow(std::abs(v.front()), p) + std::pow(std::abs(v.back()), p));
    for (std::size_t k = 1; k + 1 < v.size(); ++k) s += std::pow(std::abs(v[k]), p);
    return std::pow(s * h, 1.0 / p);
}

/// Trapezoid ∫_0^T f.
inline double trapezoid(const SampledFunction& f) {
    const auto& v = f.values();
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t k = 1; k + 1 < v.size(); ++k) s += v[k];
    return s * f.grid().spacing();
}

/// Running trapezoid ∫_0^{t_k} f for every node.
inline std::vector<double> cumulative_trapezoid(const SampledFunction& f) {
    const auto& v = f.values();
    std::vector<double> c(v.size(), 0.0);
    const double h = f.grid().spacing();
    for (std::size_t k = 1; k < v.size(); ++k) c[k] = c[k - 1] + 0.5 * h * (v[k - 1] + v[k]);
    return c;
}

}  // namespace frachaos
