// SPDX-License-Identifier: Apache-2.0
//
// Minimal deterministic parallel map: results are stored by index, so the
// output never depends on the thread count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cpwl {

/// Process-wide cap on worker threads (0 = hardware concurrency).
void set_thread_cap(std::size_t threads);
std::size_t thread_cap();

/// Calls fn(i) for i in [0, n) on up to `threads` workers (0 = global cap).
/// The first exception thrown by any call is rethrown after all workers
/// stop.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t threads = 0) {
  std::size_t t = threads == 0 ? thread_cap() : threads;
  t = std::min(t, n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t k = 0; k < t; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace cpwl
