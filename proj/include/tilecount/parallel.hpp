#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tilecount {

/// Run fn(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written into index-addressed slots by the caller so output order never
/// depends on scheduling. If several calls throw, the lowest index wins.
template <typename Fn>
void parallel_for(size_t count, int jobs, Fn&& fn) {
    if (count == 0) return;
    const size_t workers = std::min<size_t>(std::max(jobs, 1), count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    size_t err_index = count;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (err) std::rethrow_exception(err);
}

} // namespace tilecount
