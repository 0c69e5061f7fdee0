#pragma once

#include <cstddef>
#include <functional>

namespace recur {

// hardware_concurrency, falling back to 1 when the runtime reports 0.
int default_thread_count();

// Run body(i) for i in [0, count) across up to `threads` workers pulling from
// a shared atomic counter.  The first exception thrown by any worker is
// rethrown on the calling thread after all workers join.  threads <= 1 runs
// inline.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace recur
