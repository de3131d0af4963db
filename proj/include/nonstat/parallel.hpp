#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace nonstat {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Tasks are handed
/// out through an atomic counter; results must be written positionally.
/// The first exception thrown by any task is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn);

/// Worker count from NONSTAT_WORKERS, else hardware concurrency (>= 1).
int default_workers();

/// Independent generator for stream `stream` under `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

/// Standard normal variates drawn from one stream.
class NormalStream {
public:
  NormalStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : engine_(make_stream(seed, stream, substream)) {}
  double operator()() { return dist_(engine_); }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

} // namespace nonstat

#include "nonstat/parallel_impl.hpp"
