#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace hago {

// Worker count for data-parallel loops. HAGO_THREADS caps it; it never raises
// the count above the hardware default.
inline unsigned worker_count() {
  static const unsigned cached = [] {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned n = std::min(hw, 8u);
    if (const char* env = std::getenv("HAGO_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
    }
    return n;
  }();
  return cached;
}

// Runs fn(i) for i in [0, n). Each index writes only its own outputs, so the
// result is identical to the serial loop regardless of worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = worker_count();
  if (workers <= 1 || n < 2048) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min<std::size_t>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hago
