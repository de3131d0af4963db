#pragma once

// Global non-stationary SAR assembled from local Matérn parameter fields.

#include "nonstat/calibrate.hpp"
#include "nonstat/fields.hpp"
#include "nonstat/sar.hpp"
#include "nonstat/sparse.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nonstat {

/// One SarSpec per node of a buffered grid. Stencil weights are in grid units
/// (unit spacing); `grid` keeps the physical spacings for output fields.
struct SpecField {
  Grid grid;
  std::vector<SarSpec> specs;
  /// Per interior node: some table lookup was clamped.
  std::vector<std::uint8_t> clamped;
};

/// Buffer width used when none is given: max(10, ceil(2 * largest range in
/// grid units)).
int default_buffer(const ParamFields& params);

/// Per-node translation. kappa_S^2 = 1 / t(xi_g)^2 with t the isotropic table
/// (kappa^-1 -> kappa_S^-1) at the geometric-mean range xi_g. H has
/// determinant 1 and eigenvalues f(xi1^2), f(xi2^2) rescaled to unit product,
/// rotated by theta; f is the anisotropic table, or the identity map when
/// `aniso` is null. Ranges are converted to grid units first. Buffer nodes
/// copy the nearest interior node. `buffer < 0` selects default_buffer.
SpecField translate_params(const ParamFields& params, const CalibrationTable& iso, const CalibrationTable* aniso,
                           int buffer = -1);

/// How the unit marginal variance is imposed.
///  - PostScale: z = sigma * y / sqrt(d), d = diag(Q^-1); exact.
///  - RowWeight: rows of B^order are multiplied by sqrt(d), i.e. the driving
///    noise is scaled by 1/sqrt(d); approximate.
enum class Normalization { PostScale, RowWeight };

struct ModelOptions {
  int order = 1;
  Normalization normalization = Normalization::PostScale;
  AssemblyOptions assembly;
  /// Add independent N(0, tau2(s)) noise to simulations.
  bool add_nugget = false;
};

/// Immutable once built; safe to share between threads.
class NonstatSarModel {
public:
  const Grid& grid() const { return grid_; }
  const SparseOperator& b() const { return b_; }
  const SparseOperator& q() const { return q_; }
  /// diag(Q^-1) over the buffered grid.
  const Eigen::VectorXd& norm_diag() const { return norm_diag_; }
  /// sigma(s) over the buffered grid.
  const Eigen::VectorXd& sigma() const { return sigma_; }
  /// tau2(s) over the interior (metadata unless add_nugget).
  const Eigen::VectorXd& tau2() const { return tau2_; }
  const ModelOptions& options() const { return options_; }
  int order() const { return options_.order; }
  const CholeskyFactor& factor() const { return *factor_; }
  /// Precision and factor of the normalized smooth field under RowWeight
  /// (null under PostScale).
  const CholeskyFactor* weighted_factor() const { return factor_weighted_.get(); }

  /// Implied marginal variance of the smooth process at interior nodes,
  /// recomputed from a fresh factorization of the model precision.
  Eigen::VectorXd marginal_variance() const;

  /// Input references (paths, content hashes, options) for the sidecar.
  std::map<std::string, std::string> provenance;

private:
  friend NonstatSarModel build_global_model(const SpecField&, std::span<const double>, std::span<const double>,
                                            const ModelOptions&);
  Grid grid_;
  SparseOperator b_;
  SparseOperator q_;
  std::shared_ptr<const CholeskyFactor> factor_;
  Eigen::VectorXd norm_diag_;
  Eigen::VectorXd sigma_;
  Eigen::VectorXd tau2_;
  ModelOptions options_;
  // RowWeight: precision of the weighted model and its factor.
  SparseOperator q_weighted_;
  std::shared_ptr<const CholeskyFactor> factor_weighted_;
};

/// `sigma` and `tau2` hold one value per interior node (tau2 may be empty).
/// FactorizationError messages name the failing node and its spec.
NonstatSarModel build_global_model(const SpecField& specs, std::span<const double> sigma,
                                   std::span<const double> tau2, const ModelOptions& options = {});

/// translate_params followed by build_global_model with sigma = sqrt(sigma2).
NonstatSarModel build_from_params(const ParamFields& params, const CalibrationTable& iso,
                                  const CalibrationTable* aniso, const ModelOptions& options = {}, int buffer = -1);

/// n draws over the interior lattice. Draw r uses the random streams keyed
/// by (seed, r); output is independent of `workers`.
FieldEnsemble simulate_ensemble(const NonstatSarModel& model, int n, std::uint64_t seed, int workers = 1);

/// Covariance of the normalized field between every buffered node and
/// `buffered_node`, before sigma scaling.
Eigen::VectorXd covariance_column(const NonstatSarModel& model, std::size_t buffered_node);

/// Correlations between interior node `node` and every interior node; exactly
/// 1 at `node`.
Field correlation_map(const NonstatSarModel& model, std::size_t node);

} // namespace nonstat
