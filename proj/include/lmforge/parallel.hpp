#pragma once

// Minimal static-partition parallel loop. Worker count comes from
// LMFORGE_THREADS when set (>= 1), else hardware concurrency.

#include <cstddef>
#include <functional>

namespace lmforge {

std::size_t worker_count();

// Calls fn(i) for every i in [0, n). Each index runs exactly once; callers
// write results into per-index slots so the outcome does not depend on the
// number of workers. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lmforge
