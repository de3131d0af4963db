#pragma once

// Moving-window maximum likelihood for locally stationary Matérn fields.

#include "nonstat/fields.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace nonstat {

struct WindowSpec {
  /// Odd window side w; the window is w x w nodes.
  int size = 9;
  /// Spacing between consecutive window centres along each axis.
  int stride = 1;

  /// ConfigError unless w is odd, 3 <= w <= min(nx, ny) and stride >= 1.
  void validate(const Grid& grid) const;
  /// Interior node indices that centre a full window, row-major.
  std::vector<std::size_t> centers(const Grid& grid) const;
};

/// Replicate values of a w x w window: data(k, r) is replicate r at window
/// node k (row-major), coords[k] its offset from the window's first node in
/// grid units (j*h1, i*h2).
struct Window {
  int size = 0;
  double h1 = 1.0;
  double h2 = 1.0;
  std::vector<Eigen::Vector2d> coords;
  Eigen::MatrixXd data;

  int replicates() const { return int(data.cols()); }
};

/// DomainError if the window around `center` leaves the interior lattice.
Window extract_window(const FieldEnsemble& ensemble, std::size_t center, const WindowSpec& spec);

enum class VarianceConstraint { None, SumToOne };

struct FitOptions {
  VarianceConstraint constraint = VarianceConstraint::SumToOne;
  /// Starting point; ranges <= 0 mean "w/2 in grid units".
  LocalParams init{0.0, 0.0, 0.0, 0.9, 0.1, Smoothness::One};
  int max_iter = 2000;
  double tol = 1e-4;
  Smoothness nu = Smoothness::One;
  /// Fit a single range (xi1 = xi2, theta = 0).
  bool isotropic = false;
  /// Hold sigma2 and tau2 at their initial values.
  bool fix_variances = false;

  void validate() const;
};

/// (p/2) log|G| + 1/2 sum_r y_r^T G^-1 y_r with G = sigma2 R + tau2 I. Returns
/// +inf when G is not numerically positive definite.
double local_negloglik(const LocalParams& params, const Window& window);

struct WindowFit {
  LocalParams params;
  bool converged = false;
  double negloglik = 0.0;
  int iterations = 0;
  /// Best objective value after each simplex iteration.
  std::vector<double> trace;
};

/// Nelder–Mead over (log of geometric-mean range, rho cos 2theta,
/// rho sin 2theta, variance coordinates) with rho = log(xi1/xi2), restarted
/// once if the first run does not converge. The result is canonical
/// (xi1 >= xi2, theta in [0, pi)).
WindowFit fit_window(const Window& window, const FitOptions& options);

struct WindowDiagnostic {
  std::size_t node = 0;
  double negloglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LocalFit {
  ParamFields fields;
  /// One entry per window, in centre order.
  std::vector<WindowDiagnostic> windows;
  /// Non-empty when more than 20% of the windows did not converge.
  std::string warning;
};

/// Fits every window centre and fills nodes without a window from the nearest
/// centre (flagged estimated = 0). Independent of `workers`.
LocalFit fit_all_windows(const FieldEnsemble& ensemble, const WindowSpec& spec, const FitOptions& options,
                         int workers = 1);

/// CSV sidecar: node,negloglik,iterations,converged.
std::string window_diagnostics_csv(const std::vector<WindowDiagnostic>& windows);

} // namespace nonstat
