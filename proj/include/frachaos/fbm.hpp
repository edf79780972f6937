#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "csv.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "lambda_space.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace frachaos {

/// R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
inline double covariance(double hurst, double t, double s) {
    const double e = 2.0 * hurst;
    return 0.5 * (std::pow(std::abs(t), e) + std::pow(std::abs(s), e) - std::pow(std::abs(t - s), e));
}

/// One trajectory at the grid nodes, B_0 = 0.
struct FbmPath {
    double hurst;
    Grid grid;
    std::vector<double> values;
};

/// Cholesky factor of [R_H(t_i,t_j)]_{i,j>=1}, shared read-only by all paths.
class FbmSampler {
public:
    FbmSampler(double hurst, const Grid& g) : hurst_(hurst), grid_(g) {
        require(hurst > 0.0 && hurst < 0.5, "FbmSampler: hurst must lie in (0, 0.5)");
        const std::size_t N = g.n_cells();
        Eigen::MatrixXd R(N, N);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j <= i; ++j) R(i, j) = R(j, i) = covariance(hurst, g.node(i + 1), g.node(j + 1));
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success)
            throw DecompositionError("fBm covariance is not numerically positive definite; use a smaller N "
                                     "or add jitter 1e-12 to the diagonal");
        L_ = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
    }

    double hurst() const { return hurst_; }
    const Grid& grid() const { return grid_; }
    const std::shared_ptr<const Eigen::MatrixXd>& factor() const { return L_; }

    /// Path `index` of the stream `seed`; z_k depends only on (seed, index, k).
    FbmPath sample(std::uint64_t seed, std::uint64_t index) const {
        const std::size_t N = grid_.n_cells();
        Philox4x32 gen(seed);
        Eigen::VectorXd z(N);
        for (std::size_t k = 0; k < N; k += 2) {
            auto p = normal_pair(gen, index, k / 2);
            z(k) = p[0];
            if (k + 1 < N) z(k + 1) = p[1];
        }
        Eigen::VectorXd y = L_->triangularView<Eigen::Lower>() * z;
        FbmPath path{hurst_, grid_, std::vector<double>(N + 1, 0.0)};
        for (std::size_t k = 0; k < N; ++k) path.values[k + 1] = y(k);
        return path;
    }

private:
    double hurst_;
    Grid grid_;
    std::shared_ptr<const Eigen::MatrixXd> L_;
};

struct PathBatch {
    std::vector<FbmPath> paths;
    std::uint64_t seed = 0;
    std::shared_ptr<const Eigen::MatrixXd> factorization;
};

inline PathBatch simulate(const FbmSampler& sampler, std::size_t n_paths, std::uint64_t seed) {
    require(n_paths >= 1, "simulate: n_paths must be >= 1");
    PathBatch b;
    b.seed = seed;
    b.factorization = sampler.factor();
    b.paths.resize(n_paths);
    parallel_for(n_paths, [&](std::size_t i) { b.paths[i] = sampler.sample(seed, i); });
    return b;
}

inline PathBatch simulate(double hurst, const Grid& g, std::size_t n_paths, std::uint64_t seed) {
    return simulate(FbmSampler(hurst, g), n_paths, seed);
}

/// CSV with header t,path_0,...; one row per node.
inline void write_paths_csv(std::ostream& os, const PathBatch& b) {
    require(!b.paths.empty(), "write_paths_csv: empty batch");
    const Grid& g = b.paths.front().grid;
    os << "t";
    for (std::size_t i = 0; i < b.paths.size(); ++i) os << ",path_" << i;
    os << "\n";
    for (std::size_t k = 0; k < g.size(); ++k) {
        os << csv_number(g.node(k));
        for (const auto& p : b.paths) os << ',' << csv_number(p.values[k]);
        os << '\n';
    }
}

/// Forward Riemann-Stieltjes sum Σ_k f(t_k)(B_{k+1} - B_k).
inline double wiener_integral(const FbmPath& path, const LambdaElement& e) {
    require(path.grid == e.grid(), "wiener_integral: grid mismatch");
    const auto& B = path.values;
    const auto& f = e.f.values();
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < B.size(); ++k) s += f[k] * (B[k + 1] - B[k]);
    return s;
}

/// H_m with the 1/m! normalization: (m+1)H_{m+1} = x H_m - H_{m-1}.
inline double hermite(int m, double x) {
    require(m >= 0 && m <= 64, "hermite: order must lie in [0, 64]");
    if (m == 0) return 1.0;
    double h0 = 1.0, h1 = x;
    for (int k = 1; k < m; ++k) {
        const double h2 = (x * h1 - h0) / (k + 1);
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

/// I_n(h^{⊗n}) from b = B(h) and v = ‖h‖² without dividing by ‖h‖:
/// the scaled recursion P_{k+1} = b P_k - k v P_{k-1} gives n! ‖h‖^n H_n(b/‖h‖).
inline double power_integral(int n, double b, double v) {
    if (n == 0) return 1.0;
    double p0 = 1.0, p1 = b;
    for (int k = 1; k < n; ++k) {
        const double p2 = b * p1 - k * v * p0;
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

/// As below with ‖e‖² supplied, for loops over many paths.
inline double multiple_integral_power(const FbmPath& path, const LambdaElement& e, int n, double v) {
    require(n >= 0 && n <= 64, "multiple_integral_power: n must lie in [0, 64]");
    if (n == 0) return 1.0;
    require(v > 0.0, "multiple_integral_power: element has zero norm");
    const double r = std::sqrt(v);
    return std::tgamma(n + 1.0) * std::pow(r, n) * hermite(n, wiener_integral(path, e) / r);
}

inline double multiple_integral_power(const FbmPath& path, const LambdaElement& e, int n) {
    return n == 0 ? 1.0 : multiple_integral_power(path, e, n, inner(e, e));
}

/// I_n(sym(g_1 ⊗ ... ⊗ g_n)) given B(g_i) and the Gram matrix, by polarization
/// over {0,1}^n. Zero-norm combinations contribute nothing.
inline double polarized_integral(const std::vector<double>& b, const Eigen::MatrixXd& gram) {
    const int n = int(b.size());
    require(n <= 12, "multiple_integral_sym: at most 12 factors");
    if (n == 0) return 1.0;
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale += std::abs(gram(i, i));
    const double tiny = 1e-13 * n * scale;
    double s = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double bb = 0.0, v = 0.0;
        int cnt = 0;
        for (int i = 0; i < n; ++i) {
            if (!(mask >> i & 1u)) continue;
            ++cnt;
            bb += b[i];
            for (int j = 0; j < n; ++j)
                if (mask >> j & 1u) v += gram(i, j);
        }
        if (v <= tiny) continue;
        s += ((n - cnt) % 2 ? -1.0 : 1.0) * power_integral(n, bb, v);
    }
    return s / std::tgamma(n + 1.0);
}

inline double multiple_integral_sym(const FbmPath& path, const std::vector<LambdaElement>& factors) {
    const int n = int(factors.size());
    require(n <= 12, "multiple_integral_sym: at most 12 factors");
    std::vector<double> b(n);
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i) {
        b[i] = wiener_integral(path, factors[i]);
        for (int j = 0; j <= i; ++j) G(i, j) = G(j, i) = inner(factors[i], factors[j]);
    }
    return polarized_integral(b, G);
}

}  // namespace frachaos
