#pragma once

#include <cstddef>
#include <functional>

namespace dopplerkit {

/// Run fn(i) for i in [0, n) on `workers` threads. Indices are handed out
/// atomically; callers that store results by index get output independent of
/// the worker count. workers <= 1 runs inline. The first exception thrown by
/// any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace dopplerkit
