#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qfact {

/// Runs body(i) for every i in [0, n). Implementations may run indices in any
/// order and on any thread; callers write results into index-addressed slots
/// so the outcome never depends on scheduling.
using Executor =
    std::function<void(std::size_t n, const std::function<void(std::size_t)>& body)>;

inline void run_serial(std::size_t n, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

inline Executor serial_executor() { return run_serial; }

/// Static contiguous partition over `workers` threads.
inline Executor thread_executor(unsigned workers) {
  if (workers <= 1) return serial_executor();
  return [workers](std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t w = std::min<std::size_t>(workers, std::max<std::size_t>(n, 1));
    if (w <= 1) {
      run_serial(n, body);
      return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
      threads.emplace_back([&, t] {
        try {
          const std::size_t lo = t * chunk;
          const std::size_t hi = std::min(n, lo + chunk);
          for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  };
}

}  // namespace qfact
