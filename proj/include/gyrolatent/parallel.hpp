#pragma once

#include <cstddef>
#include <functional>

namespace gyrolatent {

/// Worker count: GYRO_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over contiguous index blocks, one per worker.
/// Each index is visited exactly once; callers write results by index so the
/// output does not depend on scheduling. The first exception (lowest block)
/// is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gyrolatent
