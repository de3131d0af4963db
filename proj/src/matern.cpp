#include "nonstat/matern.hpp"

#include "nonstat/errors.hpp"

#include <cmath>
#include <numbers>

namespace nonstat {

double matern_correlation(double d, Smoothness nu) {
  if (!(d >= 0.0) || !std::isfinite(d))
    throw DomainError("Matérn distance must be non-negative and finite");
  if (d == 0.0)
    return 1.0;
  switch (nu) {
  case Smoothness::Half:
    return std::exp(-d);
  case Smoothness::One:
    return d * bessel_k(1, d);
  case Smoothness::Two:
    return 0.5 * d * d * bessel_k(2, d);
  }
  return 0.0;
}

Eigen::Matrix2d AnisoTransform::rotation() const {
  Eigen::Matrix2d u;
  const double c = std::cos(theta), s = std::sin(theta);
  u << c, -s, s, c;
  return u;
}

Eigen::Matrix2d AnisoTransform::matrix() const {
  return Eigen::DiagonalMatrix<double, 2>(1.0 / xi1, 1.0 / xi2) * rotation().transpose();
}

Eigen::Matrix2d AnisoTransform::h_matrix() const {
  const Eigen::Matrix2d u = rotation();
  return u * Eigen::DiagonalMatrix<double, 2>(xi1 * xi1, xi2 * xi2) * u.transpose();
}

void AnisoTransform::validate() const {
  if (!(xi1 > 0.0) || !(xi2 > 0.0) || !std::isfinite(xi1) || !std::isfinite(xi2))
    throw DomainError("anisotropy ranges must be positive and finite");
  if (!std::isfinite(theta))
    throw DomainError("anisotropy angle must be finite");
}

double aniso_distance(const Eigen::Vector2d& s, const Eigen::Vector2d& t, const AnisoTransform& transform) {
  return (transform.matrix() * (s - t)).norm();
}

Eigen::MatrixXd covariance_matrix(std::span<const Eigen::Vector2d> locations, const MaternSpec& spec,
                                  double tau2) {
  spec.transform.validate();
  if (!(spec.sigma2 >= 0.0) || !(tau2 >= 0.0))
    throw DomainError("variances must be non-negative");
  const auto n = Eigen::Index(locations.size());
  const Eigen::Matrix2d a = spec.transform.matrix();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    g(j, j) = spec.sigma2 + tau2;
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double d = (a * (locations[j] - locations[k])).norm();
      g(j, k) = g(k, j) = spec.sigma2 * matern_correlation(d, spec.nu);
    }
  }
  return g;
}

Eigen::MatrixXd lattice_covariance(int w, double h1, double h2, const MaternSpec& spec, double tau2) {
  spec.transform.validate();
  if (w < 1)
    throw DomainError("window size must be positive");
  const Eigen::Matrix2d a = spec.transform.matrix();
  // Covariance depends on the lag (di, dj) only; di in [0, w), dj in (-w, w).
  const int span = 2 * w - 1;
  Eigen::MatrixXd lag(w, span);
  for (int di = 0; di < w; ++di)
    for (int dj = -(w - 1); dj < w; ++dj) {
      const Eigen::Vector2d disp(dj * h1, di * h2);
      lag(di, dj + w - 1) = spec.sigma2 * matern_correlation((a * disp).norm(), spec.nu);
    }
  const int n = w * w;
  Eigen::MatrixXd g(n, n);
  for (int p = 0; p < n; ++p) {
    const int pi = p / w, pj = p % w;
    g(p, p) = spec.sigma2 + tau2;
    for (int q = p + 1; q < n; ++q) {
      const int qi = q / w, qj = q % w;
      // q comes after p, so qi >= pi.
      g(p, q) = g(q, p) = lag(qi - pi, qj - pj + w - 1);
    }
  }
  return g;
}

} // namespace nonstat
