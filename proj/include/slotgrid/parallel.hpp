#pragma once

#include <cstddef>
#include <functional>

namespace slotgrid {

// Worker count used by the pure kernels. Defaults to SLOTGRID_THREADS when set, else 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker; callers
// write to disjoint outputs so results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t min_items_per_worker = 1);

}  // namespace slotgrid
