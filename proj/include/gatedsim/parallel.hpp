#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace gatedsim {

/// Runs fn(row) for every row in [0, rows) on up to `threads` workers.
/// Rows are handed out in fixed contiguous blocks, so any per-row output is
/// independent of the thread count.
inline void parallel_rows(int rows, int threads,
                          const std::function<void(int)>& fn) {
  if (rows <= 0) return;
  const int workers = std::clamp(threads, 1, rows);
  if (workers == 1) {
    for (int y = 0; y < rows; ++y) fn(y);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int block = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * block;
    const int end = std::min(rows, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (int y = begin; y < end; ++y) fn(y);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (cascade) summation in fixed order.
inline double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace gatedsim
