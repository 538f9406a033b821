#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace gaussenv {

// Runs fn(0..n-1) across up to `jobs` threads. Callers write results into
// per-index slots, so output is independent of scheduling.
inline void parallel_for(long long n, int jobs, const std::function<void(long long)>& fn) {
  if (n <= 0) return;
  if (jobs < 2 || n == 1) {
    for (long long i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = static_cast<int>(jobs < n ? jobs : n);
  std::atomic<long long> counter{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        long long i = counter.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gaussenv
