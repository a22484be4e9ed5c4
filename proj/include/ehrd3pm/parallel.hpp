#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

inline int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n).
// Chunk boundaries depend only on (n, chunk_size), and worker w owns chunks
// {w, w+k, w+2k, ...}, so outputs are identical for any thread count as long
// as chunks write disjoint state; cross-chunk reductions must merge results
// in chunk order after the join.
inline void parallel_chunks(Eigen::Index n, Eigen::Index chunk_size, int threads,
                            const std::function<void(int, Eigen::Index, Eigen::Index)>& fn) {
  if (n <= 0) return;
  if (chunk_size <= 0) chunk_size = n;
  const Eigen::Index n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 0) threads = default_threads();
  const int workers = static_cast<int>(std::min<Eigen::Index>(threads, n_chunks));

  auto run = [&](int worker) {
    for (Eigen::Index c = worker; c < n_chunks; c += workers) {
      const Eigen::Index begin = c * chunk_size;
      const Eigen::Index end = std::min(begin + chunk_size, n);
      fn(static_cast<int>(c), begin, end);
    }
  };

  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
  for (auto& th : pool) th.join();
}

} // namespace ehrd3pm
