#pragma once

#include <cstddef>
#include <functional>

namespace dgflow {

// Number of worker threads used by parallel_for; 0 means hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Calls fn(i) for every i in [0, n). Work is split into contiguous blocks;
// with one thread (or deterministic) it runs in order on the caller. The
// first exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  bool deterministic = false);

// Raises the allocator's mmap and trim thresholds so that tape buffers are
// recycled from the heap instead of being mapped and unmapped every step.
// Idempotent; a no-op outside glibc.
void tune_allocator();

}  // namespace dgflow
