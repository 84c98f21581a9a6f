#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mixlab::harness {

/// Worker count: MIXLAB_JOBS wins over the flag; both absent means one per
/// hardware thread.
inline std::size_t resolve_jobs(std::optional<std::size_t> flag) {
  if (const char *env = std::getenv("MIXLAB_JOBS"); env && *env) {
    std::size_t v = 0;
    const std::string s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v == 0)
      throw std::invalid_argument("MIXLAB_JOBS must be a positive integer");
    return v;
  }
  if (flag && *flag > 0)
    return *flag;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Run f(0..n-1) on up to `jobs` threads. Each index owns its output slot, so
/// results merge in index order. The first exception is rethrown after join.
template <class F> void parallel_for(std::size_t n, std::size_t jobs, F &&f) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error)
            error = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace mixlab::harness
