#pragma once

#include <functional>

namespace fednam {

// Runs fn(0..count-1) on up to `threads` workers in contiguous blocks.
// Callers guarantee disjoint writes, so results do not depend on
// scheduling. threads <= 1 runs inline.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

// Worker pool size: `requested` if positive, else hardware concurrency,
// both capped by the FEDNAM_THREADS environment variable when set.
int resolve_threads(int requested);

}  // namespace fednam
