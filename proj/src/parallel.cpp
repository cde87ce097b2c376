#include "htsc/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace htsc {

namespace {
std::atomic<int> g_threads{0};  // 0 = use hardware concurrency
thread_local bool tls_in_parallel = false;

int effective_threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    n = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return n;
}
}  // namespace

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

int thread_count() { return effective_threads(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = effective_threads();
  if (n == 0) return;
  if (workers <= 1 || n < 2 || tls_in_parallel) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(k);
  for (std::size_t w = 0; w < k; ++w) {
    // Static block partition: chunk boundaries depend only on (n, k).
    const std::size_t lo = n * w / k;
    const std::size_t hi = n * (w + 1) / k;
    pool.emplace_back([&, lo, hi] {
      tls_in_parallel = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
      tls_in_parallel = false;
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace htsc
