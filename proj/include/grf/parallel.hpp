#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace grf {

namespace detail {
inline std::atomic<int>& worker_count() {
  static std::atomic<int> count{1};
  return count;
}
}  // namespace detail

inline void set_threads(int n) { detail::worker_count() = std::max(1, n); }
inline int threads() { return detail::worker_count(); }

// Runs body(i) for i in [0, n). Work is split into contiguous chunks so each
// index is computed by exactly one worker; kernels must only write to slot i.
// Reductions are never done here, which keeps results independent of the
// worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const auto workers = static_cast<std::size_t>(threads());
  constexpr std::size_t kMinChunk = 512;
  if (workers <= 1 || n < 2 * kMinChunk) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t chunks = std::min(workers, n / kMinChunk);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
      pool.emplace_back([&, c] {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace grf
