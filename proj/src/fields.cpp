#include "nonstat/fields.hpp"

#include "nonstat/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace nonstat {

double smoothness_value(Smoothness nu) {
  switch (nu) {
  case Smoothness::Half:
    return 0.5;
  case Smoothness::One:
    return 1.0;
  case Smoothness::Two:
    return 2.0;
  }
  return 1.0;
}

Smoothness smoothness_from(double nu) {
  if (nu == 0.5)
    return Smoothness::Half;
  if (nu == 1.0)
    return Smoothness::One;
  if (nu == 2.0)
    return Smoothness::Two;
  throw DomainError("smoothness must be one of 0.5, 1, 2 (got " + std::to_string(nu) + ")");
}

int sar_order(Smoothness nu) {
  switch (nu) {
  case Smoothness::One:
    return 1;
  case Smoothness::Two:
    return 2;
  default:
    throw DomainError("no SAR order corresponds to smoothness 0.5");
  }
}

void Grid::validate() const {
  if (nx < 1 || ny < 1)
    throw DomainError("grid dimensions must be positive");
  if (!(h1 > 0.0) || !(h2 > 0.0) || !std::isfinite(h1) || !std::isfinite(h2))
    throw DomainError("grid spacings must be positive and finite");
  if (buffer < 0)
    throw DomainError("grid buffer must be non-negative");
}

void Field::validate() const {
  grid.validate();
  if (values.size() != grid.interior_size())
    throw ShapeError("field has " + std::to_string(values.size()) + " values, grid needs " +
                     std::to_string(grid.interior_size()));
  for (double v : values)
    if (!std::isfinite(v))
      throw DomainError("field contains non-finite values");
}

void FieldEnsemble::validate() const {
  grid.validate();
  if (replicates.empty())
    throw DomainError("ensemble must hold at least one replicate");
  for (const auto& r : replicates)
    Field{grid, r}.validate();
}

void LocalParams::validate() const {
  if (!(xi1 > 0.0) || !(xi2 > 0.0) || !std::isfinite(xi1) || !std::isfinite(xi2))
    throw DomainError("ranges xi1, xi2 must be positive and finite");
  if (!(theta >= 0.0 && theta < std::numbers::pi))
    throw DomainError("theta must lie in [0, pi)");
  if (!(sigma2 >= 0.0) || !(tau2 >= 0.0) || !std::isfinite(sigma2) || !std::isfinite(tau2))
    throw DomainError("variances must be non-negative and finite");
}

double LocalParams::mean_range() const { return std::sqrt(xi1 * xi2); }

LocalParams canonicalize(LocalParams p) {
  constexpr double pi = std::numbers::pi;
  if (p.xi1 < p.xi2) {
    std::swap(p.xi1, p.xi2);
    p.theta += pi / 2.0;
  }
  p.theta = std::fmod(p.theta, pi);
  if (p.theta < 0.0)
    p.theta += pi;
  if (p.theta >= pi)
    p.theta = 0.0;
  return p;
}

void ParamFields::validate() const {
  grid.validate();
  const auto n = grid.interior_size();
  if (params.size() != n || converged.size() != n || estimated.size() != n)
    throw ShapeError("parameter field length does not match grid");
  for (const auto& p : params)
    p.validate();
}

Standardized standardize(const FieldEnsemble& ensemble) {
  ensemble.validate();
  const std::size_t p = ensemble.size();
  if (p < 2)
    throw DomainError("standardization needs at least two replicates");
  const std::size_t n = ensemble.grid.interior_size();

  Standardized out;
  out.mean = Field{ensemble.grid, std::vector<double>(n, 0.0)};
  out.sd = Field{ensemble.grid, std::vector<double>(n, 0.0)};
  out.ensemble = ensemble;

  std::vector<std::size_t> degenerate;
  for (std::size_t k = 0; k < n; ++k) {
    double mean = 0.0;
    for (const auto& r : ensemble.replicates)
      mean += r[k];
    mean /= double(p);
    double ss = 0.0;
    for (const auto& r : ensemble.replicates)
      ss += (r[k] - mean) * (r[k] - mean);
    const double sd = std::sqrt(ss / double(p - 1));
    out.mean.values[k] = mean;
    out.sd.values[k] = sd;
    if (!(sd > 0.0)) {
      degenerate.push_back(k);
      continue;
    }
    for (auto& r : out.ensemble.replicates)
      r[k] = (r[k] - mean) / sd;
  }
  if (!degenerate.empty()) {
    std::string list;
    for (std::size_t i = 0; i < degenerate.size() && i < 10; ++i)
      list += (i ? "," : "") + std::to_string(degenerate[i]);
    if (degenerate.size() > 10)
      list += ",...";
    throw DegenerateError("zero ensemble standard deviation at nodes " + list, degenerate);
  }
  return out;
}

} // namespace nonstat
