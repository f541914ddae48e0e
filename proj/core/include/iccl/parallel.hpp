#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace iccl {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(thread_index, begin, end) on contiguous index blocks. Callers that
// need determinism must write results into per-index or per-thread slots and
// reduce in a fixed order afterwards.
template <class Fn>
void parallel_blocks(int n, int threads, Fn&& fn) {
  threads = std::min(resolve_thread_count(threads), std::max(n, 1));
  if (threads <= 1 || n <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int begin = t * chunk;
    int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, t, begin, end] { fn(t, begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace iccl
