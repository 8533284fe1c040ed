#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fapi {

/// Fixed-width fork/join helper. Work items are identified by index and must
/// write only to their own slot, so results never depend on scheduling.
class Executor {
 public:
  explicit Executor(std::size_t threads = 1) : threads_(std::max<std::size_t>(1, threads)) {}

  std::size_t threads() const { return threads_; }

  template <class Fn>
  void parallel_for(std::size_t n, Fn&& fn) const {
    if (threads_ == 1 || n <= 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::size_t error_index = n;
    std::exception_ptr error;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          // Keep the lowest failing index so the rethrown error is stable.
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
        }
      }
    };
    std::vector<std::jthread> pool;
    const std::size_t width = std::min(threads_, n);
    pool.reserve(width);
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
  }

 private:
  std::size_t threads_;
};

}  // namespace fapi
