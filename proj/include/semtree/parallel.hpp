#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace semtree {

inline int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Results must be
// written to disjoint slots so the outcome is identical for any worker
// count. The first exception thrown by any chunk is rethrown.
inline void parallel_for(int64_t n, int workers,
                         const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  workers = std::max(1, workers);
  int64_t chunks = std::min<int64_t>(workers, n);
  if (chunks == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(chunks));
  int64_t per = (n + chunks - 1) / chunks;
  for (int64_t t = 0; t < chunks; ++t) {
    int64_t lo = t * per;
    int64_t hi = std::min(n, lo + per);
    pool.emplace_back([&, t, lo, hi] {
      try {
        if (lo < hi) fn(lo, hi);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace semtree
