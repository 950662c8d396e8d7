#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace embreg {

// Worker count used by parallel_for. 1 is the deterministic reference mode,
// though every kernel in this library writes disjoint outputs per index so
// results do not depend on the setting.
void set_thread_count(int n);
int thread_count();

// Calls body(begin, end) over a static partition of [0, n).
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(thread_count(), 1)), n);
  if (workers <= 1 || n < 64) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace embreg
