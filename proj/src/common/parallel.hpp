#pragma once

#include <cstddef>
#include <functional>

namespace vr {

// Process-wide cap on worker threads used by the volume kernels. Every
// parallel kernel partitions work into fixed chunks so results never depend
// on this value.
void set_thread_count(int n);
int thread_count();

// Calls body(begin, end) over [0, n) split into contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace vr
