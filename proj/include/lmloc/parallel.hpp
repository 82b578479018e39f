#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace lmloc {

/// Runs fn(i) for i in [0, n) over up to `workers` threads. Each index is
/// visited exactly once, so writes to per-index slots stay deterministic.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace lmloc
