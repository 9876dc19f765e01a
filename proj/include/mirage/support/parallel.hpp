#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace mirage::support {

/// Run fn(0..n-1) on up to `workers` threads. fn must not throw; tasks are
/// expected to record their own failures.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto drain = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(count);
  for (int w = 0; w < count; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
}

}  // namespace mirage::support
