#pragma once

#include <cstddef>
#include <functional>

namespace chadkit {

// Worker count: CHADKIT_THREADS if set (>= 1), otherwise the hardware
// concurrency. Always at least 1.
std::size_t thread_limit();

// Runs body(i) for i in [0, n) on up to thread_limit() threads. Each index
// runs exactly once; callers must write to disjoint outputs. Exceptions from
// body are rethrown (the first one wins) after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace chadkit
