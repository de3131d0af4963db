#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nonstat {

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t nthreads = std::min<std::size_t>(std::size_t(std::max(workers, 1)), n);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error)
          first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back(body);
  }
  if (first_error)
    std::rethrow_exception(first_error);
}

inline int default_workers() {
  if (const char* env = std::getenv("NONSTAT_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1)
        return v;
    } catch (...) {
    }
  }
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32), std::uint32_t(substream), std::uint32_t(substream >> 32),
                    0x6e6f6e73u};
  return std::mt19937_64(seq);
}

} // namespace nonstat
