#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace frachaos {

/// Worker count: FRACHAOS_THREADS if set (>= 1), else hardware concurrency.
inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FRACHAOS_THREADS")) {
        try {
            long v = std::stol(env);
            if (v >= 1) return unsigned(v);
        } catch (...) {
        }
    }
    return hw;
}

/// Runs body(i) for i in [0, n) on contiguous blocks; each index writes only
/// its own outputs, so results do not depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned w = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < w; ++t) {
        pool.emplace_back([&, t] {
            const std::size_t lo = n * t / w, hi = n * (t + 1) / w;
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace frachaos
