#pragma once

#include <cstddef>
#include <functional>

namespace linkm {

/// Number of workers used by parallel_for: the override if set, else
/// LINKM_THREADS, else the hardware concurrency.
int worker_count();

/// Overrides LINKM_THREADS for the current process; 0 restores the default.
void set_worker_count(int n);

/// Runs fn(0) .. fn(n - 1) on up to worker_count() threads. Tasks must write
/// to disjoint outputs; the first exception thrown by a task is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace linkm
