#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gdlab {

/// Runs fn(i) for every i in [0, count) across up to `workers` threads.
/// Tasks own their output slots and seeds, so results are identical for any
/// worker count. The first exception is rethrown after all threads join.
template <typename Fn>
void parallel_for_index(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) return;
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (unsigned k = 0; k < w; ++k) {
    threads.emplace_back([&, k] {
      try {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) break;
          fn(i);
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gdlab
