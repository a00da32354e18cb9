#include "rlep/common.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

namespace rlep {

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(workers, n);
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex err_mtx;
  std::atomic<std::size_t> next{0};
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mtx);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rlep
