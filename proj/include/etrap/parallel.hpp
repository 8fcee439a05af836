// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace etrap {

/// Resolve a worker-count hint: 0 means hardware concurrency.
inline unsigned resolve_workers(unsigned hint)
{
    if (hint > 0) {
        return hint;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluate fn(i) for i in [0, count) on up to `workers` threads and return
/// the results in index order. Work is handed out dynamically; the output
/// depends only on fn, never on scheduling. The first exception (lowest
/// index) is rethrown after all workers join.
template <class Fn>
auto parallel_map(std::size_t count, unsigned workers, const Fn& fn) -> std::vector<decltype(fn(std::size_t{}))>
{
    using Result = decltype(fn(std::size_t{}));
    std::vector<Result> results(count);
    workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(count, 1)));

    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            results[i] = fn(i);
        }
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = count;
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) {
                return;
            }
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return results;
}

}  // namespace etrap
