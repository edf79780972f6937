#pragma once

#include <stdexcept>
#include <string>

namespace frachaos {

/// Bad arguments: out-of-range parameters, mismatched grids, caps exceeded.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite samples or otherwise unusable data.
struct InvalidData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The Marchaud tail diagnostic refused membership in the Lambda space.
struct NotInSpace : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Cholesky of the fBm node covariance failed.
struct DecompositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

}  // namespace frachaos
