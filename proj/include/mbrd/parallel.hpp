#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mbrd {

inline std::atomic<unsigned>& max_threads_setting() {
    static std::atomic<unsigned> value{0};  // 0 = hardware concurrency
    return value;
}

inline void set_max_threads(unsigned threads) {
    max_threads_setting().store(threads);
}

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges,
// one per thread; output written by index stays deterministic regardless of
// scheduling. Small workloads run inline.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    unsigned threads = max_threads_setting().load();
    if (threads == 0) {
        threads = std::thread::hardware_concurrency();
    }
    if (threads <= 1 || n < 128) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    if (threads > n) {
        threads = static_cast<unsigned>(n);
    }

    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::atomic<int> error_guard{0};

    auto run_range = [&](size_t begin, size_t end) {
        try {
            for (size_t i = begin; i < end && !failed.load(std::memory_order_relaxed); ++i) {
                fn(i);
            }
        } catch (...) {
            if (error_guard.fetch_add(1) == 0) {
                first_error = std::current_exception();
            }
            failed.store(true);
        }
    };

    std::vector<std::thread> workers;
    workers.reserve(threads);
    const size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const size_t begin = static_cast<size_t>(t) * chunk;
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        workers.emplace_back(run_range, begin, end);
    }
    for (auto& w : workers) {
        w.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace mbrd
