#pragma once

#include <cstddef>
#include <functional>

namespace ramwalk::util {

// Runs body(i) for i in [0, n) on up to `workers` threads. Each index runs
// exactly once; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace ramwalk::util
