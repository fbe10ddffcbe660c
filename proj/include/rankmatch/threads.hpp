#pragma once

#include <cstddef>
#include <functional>

namespace rankmatch {

// Worker count for parallel sections: hardware concurrency capped by the
// RANKMATCH_THREADS environment variable (values < 1 mean 1).
std::size_t worker_count();

// Runs body(i) for i in [0, count). Work items must write only to their
// own slot of any shared output so results are identical for every
// worker count. The first exception thrown by a body is rethrown after
// all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace rankmatch
