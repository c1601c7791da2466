#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ivhedge {

/// Calls fn(begin, end) on `threads` contiguous blocks of [0, n). Each index is
/// handled by exactly one call, and the block boundaries depend only on
/// (n, threads); work that writes disjoint outputs per index is therefore
/// deterministic. The first exception thrown by any block is rethrown.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, int threads, Fn&& fn) {
    if (n <= 0) {
        return;
    }
    const std::ptrdiff_t workers = std::clamp<std::ptrdiff_t>(threads, 1, n);
    if (workers == 1) {
        fn(std::ptrdiff_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::ptrdiff_t w = 0; w < workers; ++w) {
        const std::ptrdiff_t begin = n * w / workers;
        const std::ptrdiff_t end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Worker count for `requested` (0 means all hardware threads).
inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace ivhedge
