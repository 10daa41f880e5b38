#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace aerogs {

// Splits [0, n) into `threads` contiguous chunks and runs fn(chunk, begin, end)
// on each. With threads <= 1 everything runs on the calling thread, which is
// the reference mode for reproducibility. If several chunks throw, the
// exception from the lowest chunk is rethrown.
template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (chunks <= 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> workers;
    workers.reserve(chunks - 1);
    auto run = [&](std::size_t c) {
      const std::size_t begin = n * c / chunks, end = n * (c + 1) / chunks;
      try {
        fn(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    };
    for (std::size_t c = 1; c < chunks; ++c) workers.emplace_back(run, c);
    run(0);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t chunk_count(std::size_t n, unsigned threads) {
  return std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
}

}  // namespace aerogs
