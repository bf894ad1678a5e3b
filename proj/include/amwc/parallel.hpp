#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace amwc {

// Runs f(0), ..., f(n-1), each exactly once. With workers > 1 indices are
// claimed dynamically; callers must only write per-index slots so the result
// is independent of the schedule. Reductions happen at the call site in
// fixed index order.
template <typename F>
void parallel_for(int n, int workers, F&& f) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  int count = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace amwc
