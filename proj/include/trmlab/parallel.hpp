#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace trmlab {

// Worker count for a run matrix: hardware concurrency, overridable and
// bounded by the TRM_LAB_THREADS environment variable, never more than jobs.
inline std::size_t worker_pool_size(std::size_t jobs) {
    std::size_t limit = std::thread::hardware_concurrency();
    if (limit == 0) limit = 1;
    if (const char* env = std::getenv("TRM_LAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) limit = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(jobs, limit));
}

// Runs fn(i) for i in [0, n) on a bounded pool. Each call must touch only its
// own result slot; the first exception is rethrown on the caller's thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = worker_pool_size(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body);
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace trmlab
