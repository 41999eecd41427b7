#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace covdiff {

inline unsigned default_worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs fn(i) for i in [0, n) across a worker pool. Each index is processed
/// exactly once; callers that need determinism must make fn(i) depend only
/// on i (e.g. via derive_seed), never on scheduling order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned n_workers = 0) {
  if (n == 0) return;
  if (n_workers == 0) n_workers = default_worker_count();
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, n));

  if (n_workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    const std::size_t begin = n * w / n_workers;
    const std::size_t end = n * (w + 1) / n_workers;
    workers.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace covdiff
