#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace khess {

/// Worker count used by parallel_for; 1 by default.
int thread_count();
void set_thread_count(int n);

/// Runs f(i) for i in [0, n) over contiguous chunks. Each index is handled
/// by exactly one worker, so writes to per-index slots are deterministic.
template <class F>
void parallel_for(std::int64_t n, F&& f) {
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), std::max<std::int64_t>(n / 256, 1)));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    pool.emplace_back([lo, hi, &f] {
      for (std::int64_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace khess
