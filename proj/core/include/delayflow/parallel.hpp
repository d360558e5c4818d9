#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace delayflow {

/// Runs fn(0..n-1) over up to `workers` threads. Each index is processed
/// exactly once; callers keep results in per-index slots so the outcome is
/// independent of scheduling. fn must not throw.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    const std::size_t thread_count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (thread_count == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace delayflow
