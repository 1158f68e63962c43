#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pros {

  /// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware concurrency).
  /// The first exception thrown by any call is rethrown after all workers finish.
  template<typename Fn>
  void parallel_for(std::size_t n, Fn&& fn, std::size_t threads = 0) {
    if (threads == 0) { threads = std::max(1U, std::thread::hardware_concurrency()); }
    threads = std::min(threads, n);
    if (threads <= 1) {
      for (std::size_t i = 0; i < n; ++i) { fn(i); }
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) { error = std::current_exception(); }
          next = n;
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) { pool.emplace_back(worker); }
    }
    if (error) { std::rethrow_exception(error); }
  }

} // namespace pros
