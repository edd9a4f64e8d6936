#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ergo {

/// Runs fn(begin, end) over a partition of [0, n) on up to `jobs` threads.
/// Work items must write to disjoint preallocated slots; results are then
/// independent of the thread count. The first worker exception is rethrown
/// on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (n == 0) return;
    if (jobs <= 1) {
        fn(std::size_t(0), n);
        return;
    }
    const std::size_t chunk = (n + std::size_t(jobs) - 1) / std::size_t(jobs);
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mutex;
    for (int t = 0; t < jobs; ++t) {
        const std::size_t b = std::min(n, std::size_t(t) * chunk);
        const std::size_t e = std::min(n, b + chunk);
        if (b < e)
            pool.emplace_back([&fn, &err, &err_mutex, b, e] {
                try {
                    fn(b, e);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace ergo
