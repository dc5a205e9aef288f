// parallel.hpp — chunked parallel loops with disjoint writes so results are
// bitwise identical regardless of the thread count. SWENT_THREADS caps the
// worker count (0 or unset = auto).

#pragma once

#include <cstddef>
#include <functional>

namespace swent {

int thread_count();

// fn(begin, end) over a partition of [0, n); chunks are contiguous and
// processed at most once, so writers to disjoint slices need no locking.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace swent
