#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ymh {

/// Worker count from YMH_THREADS (default 1). Results never depend on it:
/// loops only write disjoint per-site slots and reductions stay serial.
inline int thread_count() {
  static const int count = [] {
    const char* env = std::getenv("YMH_THREADS");
    if (env == nullptr) return 1;
    const int v = std::atoi(env);
    return std::clamp(v, 1, 256);
  }();
  return count;
}

template <class Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::min(thread_count(), std::max(1, count / 1024));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr first;
  std::mutex m;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(count, begin + chunk);
      pool.emplace_back([&, begin, end] {
        try {
          for (int i = begin; i < end; ++i) fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!first) first = std::current_exception();
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace ymh
