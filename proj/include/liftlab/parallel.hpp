#pragma once

// Deterministic parallel map: jobs claim indices from a counter and write
// only to their own output slot, so results are identical for any worker
// count. The first exception wins and is rethrown after the pool joins.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace liftlab {

inline int hardware_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

inline void parallel_for(std::uint64_t jobs, int workers,
                         const std::function<void(std::uint64_t)>& body) {
  if (jobs == 0) return;
  if (workers < 1) workers = 1;
  if (static_cast<std::uint64_t>(workers) > jobs)
    workers = static_cast<int>(jobs);
  if (workers == 1) {
    for (std::uint64_t i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&]() {
    while (true) {
      std::uint64_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace liftlab
