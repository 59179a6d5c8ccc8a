#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace uit {

/// Runs fn(i) for i in [0, n) across worker threads. Each index is handled
/// by exactly one thread and results must be written to index-owned slots,
/// which keeps output independent of scheduling. threads <= 0 means
/// hardware concurrency.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::size_t nt = threads > 0 ? static_cast<std::size_t>(threads)
                               : std::thread::hardware_concurrency();
  if (nt == 0) nt = 1;
  if (nt > n) nt = n;
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace uit
