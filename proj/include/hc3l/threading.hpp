#pragma once

#include <cstddef>
#include <functional>

namespace hc3l {

// Process-wide worker count for parallel_for. 0 restores the hardware default.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n) across worker threads with static contiguous
// chunking. Bodies must write disjoint outputs only; given that, results are
// bit-identical for every thread count. The first exception thrown by a body
// is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hc3l
