#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

namespace qmotor {

/// Runs fn(0..n-1) on a small worker pool. Results are whatever fn writes
/// into caller-owned slots, so output order is the input order regardless of
/// scheduling. A throwing point never aborts its siblings; the returned
/// vector holds one error message per index (empty = ok).
template <class F>
std::vector<std::string> parallel_points(int n, int workers, F&& fn) {
  std::vector<std::string> status(static_cast<size_t>(n));
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, n);
  std::atomic<int> next{0};
  auto body = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        status[static_cast<size_t>(i)] = e.what();
      } catch (...) {
        status[static_cast<size_t>(i)] = "unknown error";
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  return status;
}

}  // namespace qmotor
