#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace lscp {

// Static-chunked parallel loop. Each index is processed exactly once and
// writes to its own result slot, so output is bit-identical for any thread
// count. fn must be safe to call concurrently.
template <typename Fn>
void parallel_for(long n, int threads, Fn&& fn) {
    if (n <= 0) return;
    threads = static_cast<int>(std::max<long>(1, std::min<long>(threads, n)));
    if (threads == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    long chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        long lo = w * chunk;
        long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (long i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace lscp
