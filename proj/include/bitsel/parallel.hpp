#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace bitsel {

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn over [0, n) split into contiguous blocks, one per worker. Block
// boundaries are rounded to `align` so workers touching packed bit words
// never share one. Output must depend only on the element index, which makes
// the result identical for every thread count.
inline void parallel_blocks(std::int64_t n, int threads, std::int64_t align,
                            const std::function<void(std::int64_t, std::int64_t)>& fn) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  std::int64_t block = (n + threads - 1) / threads;
  block = (block + align - 1) / align * align;
  if (threads == 1 || block >= n) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> workers;
  for (std::int64_t lo = 0; lo < n; lo += block) {
    const std::int64_t hi = std::min(n, lo + block);
    workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace bitsel
