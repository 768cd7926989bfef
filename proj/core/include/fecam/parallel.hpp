#pragma once

#include <cstddef>
#include <functional>

namespace fecam {

/// Resolves a worker count. A nonzero request wins; otherwise the
/// FECAM_THREADS environment variable is consulted, and 0 or unset means
/// one worker per hardware thread.
std::size_t worker_count(std::size_t requested = 0);

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any invocation is rethrown on the calling thread.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace fecam
