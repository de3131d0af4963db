#pragma once

#include "nonstat/fields.hpp"

#include <Eigen/Dense>

#include <span>

namespace nonstat {

/// Modified Bessel function of the second kind K_n(x) for integer n in {0, 1, 2}.
///
/// Uses the ascending series for x <= 2 and Steed's continued fraction
/// (Temme's CF2) above, both to near machine precision. Returns 0 once
/// exp(-x) underflows. Throws DomainError for x <= 0 or unsupported n.
double bessel_k(int order, double x);

/// Unit-range Matérn correlation 2^(1-nu)/Gamma(nu) d^nu K_nu(d).
/// Exactly 1 at d = 0. Throws DomainError for negative or non-finite d.
double matern_correlation(double d, Smoothness nu);

/// Geometric anisotropy A = D^-1 U^T with U the rotation by theta and
/// D = diag(xi1, xi2). Distances are ||A (s - s')||.
struct AnisoTransform {
  double theta = 0.0;
  double xi1 = 1.0;
  double xi2 = 1.0;

  static AnisoTransform isotropic(double range) { return {0.0, range, range}; }

  Eigen::Matrix2d rotation() const;
  Eigen::Matrix2d matrix() const;
  /// H = A^-T A^-1 = U D^2 U^T.
  Eigen::Matrix2d h_matrix() const;
  void validate() const;
};

double aniso_distance(const Eigen::Vector2d& s, const Eigen::Vector2d& t, const AnisoTransform& transform);

struct MaternSpec {
  Smoothness nu = Smoothness::One;
  double sigma2 = 1.0;
  AnisoTransform transform;
};

/// G = sigma2 * R + tau2 * I over an arbitrary point set.
Eigen::MatrixXd covariance_matrix(std::span<const Eigen::Vector2d> locations, const MaternSpec& spec,
                                  double tau2);

/// Same matrix for a w x w lattice window with spacings (h1, h2), listed
/// row-major. Evaluates the kernel once per distinct lag instead of once per
/// pair.
Eigen::MatrixXd lattice_covariance(int w, double h1, double h2, const MaternSpec& spec, double tau2);

} // namespace nonstat
