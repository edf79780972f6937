#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace frachaos {

/// perm(A) by Ryser's inclusion-exclusion, visiting column subsets in Gray-code
/// order so each step adds or removes one column from the running row sums.
template <class Derived>
typename Derived::Scalar permanent(const Eigen::MatrixBase<Derived>& a) {
    using T = typename Derived::Scalar;
    const int n = int(a.rows());
    require(a.rows() == a.cols(), "permanent: matrix must be square");
    require(n <= 12, "permanent: n must be at most 12");
    if (n == 0) return T(1);
    std::vector<T> row(n, T(0));
    T total(0);
    std::uint32_t gray = 0;
    for (std::uint32_t k = 1; k < (1u << n); ++k) {
        const int j = std::countr_zero(k);
        gray ^= 1u << j;
        const bool added = gray >> j & 1u;
        for (int i = 0; i < n; ++i) row[i] += added ? a(i, j) : -a(i, j);
        T prod(1);
        for (int i = 0; i < n; ++i) prod *= row[i];
        // sign (-1)^{n-|S|}
        total += ((n - std::popcount(gray)) % 2) ? -prod : prod;
    }
    return total;
}

}  // namespace frachaos
