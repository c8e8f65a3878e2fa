#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace riskhedge {

/// Worker count: RISKHEDGE_THREADS if set (values < 1 mean serial), otherwise
/// the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("RISKHEDGE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    return v < 1 ? 1u : static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(i) for i in [0, count). Independent node-level work only; the first
/// exception thrown by any worker is rethrown on the caller.
template <class Fn>
inline void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = worker_count();
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex mu;
  std::exception_ptr err;
  std::size_t next = 0;
  auto body = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= count || err) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  pool.reserve(n);
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace riskhedge
