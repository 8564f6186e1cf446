#pragma once

#include <cstddef>
#include <functional>

namespace interlock {

// Worker count used by the parallel loops; 0 means hardware concurrency.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Runs fn(i) for every i in [0, count) on up to thread_count() threads. Work
// items are claimed dynamically; callers that reduce must do so per item.
// The first exception thrown by any item is rethrown after all threads join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace interlock
