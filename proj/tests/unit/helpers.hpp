#pragma once

#include "nonstat/fields.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline nonstat::FieldEnsemble random_ensemble(int nx, int ny, int p, unsigned seed, double h1 = 1.0,
                                              double h2 = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  nonstat::FieldEnsemble e;
  e.grid = nonstat::Grid{nx, ny, h1, h2, 0};
  e.replicates.assign(std::size_t(p), std::vector<double>(e.grid.interior_size()));
  for (auto& r : e.replicates)
    for (auto& v : r)
      v = n01(rng);
  return e;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nonstat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testing
