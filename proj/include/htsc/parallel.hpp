#pragma once

#include <cstddef>
#include <functional>

namespace htsc {

/// Cap the worker pool used by parallel_for. 0 or negative resets to the
/// hardware concurrency. Results are independent of the thread count:
/// workers only write to disjoint, index-addressed slots and all floating
/// point reductions happen sequentially afterwards.
void set_thread_count(int n);
int thread_count();

/// Run fn(i) for i in [0, n). Falls back to a serial loop for small n,
/// when only one thread is configured, or when already inside a parallel
/// region (no nested pools).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace htsc
