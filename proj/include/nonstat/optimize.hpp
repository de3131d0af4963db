#pragma once

// Derivative-free minimizers shared by calibration and local likelihood fits.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace nonstat {

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Golden-section search for a minimum of a unimodal f on [lo, hi]; stops
/// when the bracket is narrower than `tol`.
ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

/// Coarse scan over `points` log-spaced values in [lo, hi] followed by a
/// golden-section refinement inside the bracket around the best scan point.
/// Throws CalibrationError when the scan shows more than one clear local
/// minimum (relative dip larger than `unimodal_slack`), or when the objective
/// is not finite anywhere.
ScalarMinimum bracketed_minimum(const std::function<double(double)>& f, double lo, double hi, int points,
                                double tol, double unimodal_slack = 1e-3);

struct SimplexOptions {
  int max_iter = 2000;
  /// Converged once every vertex lies within `tol` (max-norm) of the best.
  double tol = 1e-5;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  /// Best objective value after each iteration (non-increasing).
  std::vector<double> trace;
};

/// Nelder–Mead simplex minimization. Non-finite objective values are treated
/// as +inf (infeasible). Throws DomainError if every vertex of the starting
/// simplex is infeasible.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& step, const SimplexOptions& options = {});

} // namespace nonstat
