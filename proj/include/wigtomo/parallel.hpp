#pragma once

#include <cstddef>
#include <functional>

namespace wigtomo {

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Work is split into contiguous blocks; the first exception
/// thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace wigtomo
