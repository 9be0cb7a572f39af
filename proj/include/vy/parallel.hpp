#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vy {

// Calls f(i) for i in [0, n) on up to `jobs` threads, handing out indices in
// small chunks. The first exception thrown by any call is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f, std::size_t chunk = 4) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), (n + chunk - 1) / std::max<std::size_t>(chunk, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex guard;
  auto work = [&] {
    for (;;) {
      std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      {
        std::lock_guard<std::mutex> lock(guard);
        if (failure) return;
      }
      try {
        for (std::size_t i = begin; i < std::min(n, begin + chunk); ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vy
