#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace frachaos {

/// Philox4x32-10 (Salmon et al., Random123): a counter-based generator, so
/// every (seed, path, node) has its own stream regardless of scheduling.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)} {}

    Counter operator()(Counter c) const {
        auto k = key_;
        for (int r = 0; r < 10; ++r) {
            c = round(c, k);
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return c;
    }

private:
    static Counter round(const Counter& c, const std::array<std::uint32_t, 2>& k) {
        const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
        const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
        return {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
                std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
    }

    std::array<std::uint32_t, 2> key_;
};

/// Standard normals for node pair (2i, 2i+1) of a path, via Box-Muller.
inline std::array<double, 2> normal_pair(const Philox4x32& gen, std::uint64_t path, std::uint64_t pair) {
    auto w = gen({std::uint32_t(pair), std::uint32_t(pair >> 32), std::uint32_t(path),
                  std::uint32_t(path >> 32)});
    const std::uint64_t a = (std::uint64_t(w[0]) << 32 | w[1]) >> 11;
    const std::uint64_t b = (std::uint64_t(w[2]) << 32 | w[3]) >> 11;
    const double u1 = (double(a) + 0.5) * 0x1.0p-53;  // (0,1), never 0
    const double u2 = double(b) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

}  // namespace frachaos
