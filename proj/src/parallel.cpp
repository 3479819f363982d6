#include "slotgrid/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace slotgrid {
namespace {

int initial_thread_count() {
    if (const char* env = std::getenv("SLOTGRID_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
    return 1;
}

std::atomic<int>& thread_setting() {
    static std::atomic<int> value{initial_thread_count()};
    return value;
}

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int n) { thread_setting().store(std::max(1, n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t min_items_per_worker) {
    std::size_t workers = static_cast<std::size_t>(thread_count());
    workers = std::min(workers, n / std::max<std::size_t>(1, min_items_per_worker));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Static contiguous chunks.
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    auto run = [&](std::size_t begin) {
        const std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) fn(i);
    };
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w * chunk);
    run(0);
    for (auto& t : pool) t.join();
}

}  // namespace slotgrid
