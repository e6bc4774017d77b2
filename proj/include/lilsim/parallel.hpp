#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lilsim {

/// Runs fn(i) for i = 0..count-1 on up to `workers` threads. Work items are
/// claimed from a shared counter; callers write results into slot i so the
/// outcome does not depend on scheduling. The first exception is rethrown
/// after all threads join.
template <class Fn>
void parallel_for(std::uint64_t count, unsigned workers, Fn&& fn) {
  const auto cap = static_cast<unsigned>(std::min<std::uint64_t>(count, 1024));
  workers = std::max(1u, std::min(workers, std::max(cap, 1u)));
  if (workers == 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        if (stop.load(std::memory_order_relaxed)) return;
        const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Worker count from the hardware, at least 1.
inline unsigned default_workers() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace lilsim
