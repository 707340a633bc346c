#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace polyformer {

// Worker cap: hardware concurrency, further capped by POLYFORMER_THREADS.
inline int default_workers() {
  static const int cached = [] {
    unsigned hw = std::thread::hardware_concurrency();
    int n = hw == 0 ? 1 : static_cast<int>(hw);
    if (const char* env = std::getenv("POLYFORMER_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) n = std::min(n, cap);
    }
    return n;
  }();
  return cached;
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks. Chunk geometry is
// independent of the worker count, so per-chunk results reduced in chunk
// order give bit-identical totals no matter how many threads ran.
template <typename Fn>
void for_each_chunk(std::size_t count, std::size_t chunk_size, int workers, Fn&& fn) {
  if (count == 0) return;
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  int use = workers > 0 ? workers : default_workers();
  use = static_cast<int>(std::min<std::size_t>(use, nchunks));
  if (use <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) break;
      fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(use - 1);
  for (int t = 0; t < use - 1; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

}  // namespace polyformer
