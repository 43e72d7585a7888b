#pragma once
// Deterministic task-parallel helper.  Work is split into a fixed number of
// tasks independent of the thread count; each task writes only its own slot,
// and callers merge slots in task order, so results are identical for any
// number of workers.

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace poelab {

inline void parallel_tasks(std::size_t n_tasks, int threads,
                           const std::function<void(std::size_t)>& fn) {
    if (n_tasks == 0) return;
    if (threads <= 1 || n_tasks == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_tasks);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace poelab
