#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace poseloop {

// Runs fn(i) for i in [0, n) on `workers` threads with a static stride
// assignment. Task i always runs the same computation regardless of worker
// count; callers must write results into slot i of a pre-sized container so
// aggregate output is identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([t, w, n, &fn] {
      for (std::size_t i = t; i < n; i += w) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

inline int default_workers() {
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(hw == 0 ? 1 : (hw > 8 ? 8 : hw));
}

}  // namespace poseloop
