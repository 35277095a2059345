#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dgs {

inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(chunk) for every chunk in [0, chunks). Chunks are claimed dynamically,
/// so fn must write only to per-chunk state; the first exception is rethrown.
template <typename Fn>
void parallel_for_chunks(size_t chunks, int num_threads, Fn&& fn) {
    const size_t workers = std::min(chunks, static_cast<size_t>(resolve_thread_count(num_threads)));
    if (workers <= 1) {
        for (size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
            try {
                fn(c);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace dgs
