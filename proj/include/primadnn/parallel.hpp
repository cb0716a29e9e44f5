#pragma once

#include <cstddef>
#include <functional>

namespace primadnn {

/// requested > 0 wins; otherwise PRIMADNN_THREADS; otherwise 1.
int resolve_threads(int requested = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
/// by index so results written to slot i are independent of scheduling.
/// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace primadnn
