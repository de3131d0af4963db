#pragma once

// Model checking by whitening, and the Monte Carlo study of local range
// estimation.

#include "nonstat/emulator.hpp"
#include "nonstat/fields.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nonstat {

/// w = B^order (sqrt(d) * y / sigma) with y zero-padded into the buffer, cropped
/// to the interior (RowWeight models apply sqrt(d) after B^order instead).
/// ShapeError on grid mismatch, DomainError where sigma = 0.
Field whiten(const NonstatSarModel& model, const Field& field);
FieldEnsemble whiten(const NonstatSarModel& model, const FieldEnsemble& ensemble, int workers = 1);

struct WhitenessOptions {
  /// Nodes within `rim` of the lattice edge are left out of every statistic.
  int rim = 1;
  /// Variance at a node pools replicates over the (2r+1)^2 neighbourhood;
  /// 0 uses the node alone.
  int pool_radius = 2;
};

struct WhitenessReport {
  /// Sample variance per node; NaN on the excluded rim.
  Field variance;
  double lag_corr_h = 0.0;
  double lag_corr_v = 0.0;
  double max_abs_lag = 0.0;
  double variance_q05 = 0.0;
  double variance_q50 = 0.0;
  double variance_q95 = 0.0;
  /// Variances pooled across neighbouring nodes.
  bool pooled = false;
  WhitenessOptions options;

  std::string summary_json() const;
};

/// Lag-1 correlations are Pearson correlations pooled over every horizontal
/// (vertical) neighbour pair and replicate. DomainError if no node survives
/// the rim.
WhitenessReport whiteness_stats(const FieldEnsemble& whitened, const WhitenessOptions& options = {});

/// Full factorial design; range = multiplier * window size (grid units).
struct McDesign {
  std::vector<int> window_sizes{5, 9, 13};
  std::vector<double> range_multipliers{0.5, 1.0};
  std::vector<Smoothness> nus{Smoothness::One, Smoothness::Two};
  std::vector<int> replicate_counts{5, 15, 30};
  int repetitions = 20;
  std::uint64_t seed = 20240611;
  double sigma2 = 0.99;
  double tau2 = 0.01;

  /// Desk-scale default (3 x 2 x 2 x 3, 20 repetitions).
  static McDesign desk() { return {}; }
  /// Full-size layout: 11 window sizes x 4 ranges x 2 smoothness values x
  /// 9 replicate counts, 100 repetitions.
  static McDesign full();

  std::size_t cells() const;
  void validate() const;
};

struct McEstimate {
  int window = 0;
  double range_multiplier = 0.0;
  Smoothness nu = Smoothness::One;
  int p = 0;
  int repetition = 0;
  double estimate = 0.0;
  double percent_error = 0.0;
  bool ok = true;
  std::string error;
};

struct McCell {
  int window = 0;
  double range_multiplier = 0.0;
  Smoothness nu = Smoothness::One;
  int p = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int succeeded = 0;
  int failed = 0;
};

struct McResult {
  std::vector<McEstimate> raw;
  std::vector<McCell> summary;

  std::string raw_csv() const;
  std::string summary_csv() const;
  const McCell& cell(int window, double multiplier, Smoothness nu, int p) const;
};

/// Each repetition of a (window, range, nu) cell draws one stream of
/// replicates; smaller replicate counts use a prefix of the same draws.
/// Fits are isotropic with sigma2 and tau2 held at their true values.
/// Result does not depend on `workers`.
McResult run_mc_study(const McDesign& design, int workers = 1);

} // namespace nonstat
