#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nsm {

// Runs f(i) for i in [0, n). Worker w handles indices w, w+W, w+2W, ...
// Callers write results into per-index slots, so output never depends on
// the worker count.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const auto w_count = static_cast<std::size_t>(workers < 1 ? 1 : workers);
  if (w_count == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w_count);
  std::vector<std::thread> threads;
  threads.reserve(w_count);
  for (std::size_t w = 0; w < w_count; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += w_count) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace nsm
