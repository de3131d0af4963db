#pragma once

// Numerical translation from Matérn ranges to SAR parameters.
//
// On an N x N unit lattice the centre-node correlation vector of the Matérn
// model is compared with that of a stationary SAR; the SAR parameter that
// minimizes the l2 distance is the calibrated value.

#include "nonstat/fields.hpp"
#include "nonstat/matern.hpp"
#include "nonstat/sar.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nonstat {

/// Matérn correlations between the centre of an N x N unit lattice and every
/// node, row-major, centre entry exactly 1.
Eigen::VectorXd matern_center_correlations(const AnisoTransform& transform, Smoothness nu, int n);
Eigen::VectorXd matern_center_correlations(double kappa_inv, Smoothness nu, int n);

/// ||sigma_m - sigma_s|| / ||sigma_s||. Throws ShapeError on length mismatch,
/// DegenerateError if sigma_s is zero.
double relative_error(std::span<const double> sigma_m, std::span<const double> sigma_s);
double relative_error(const Eigen::VectorXd& sigma_m, const Eigen::VectorXd& sigma_s);

struct CalibrationPoint {
  /// kappa^-1 (isotropic) or an eigenvalue of D^2 (anisotropic), grid units.
  double matern_value = 0.0;
  /// Calibrated kappa_S^-1 (isotropic) or eigenvalue of H (anisotropic).
  double sar_value = 0.0;
  double rel_err_cal = 0.0;
  double rel_err_naive = 0.0;
  Smoothness nu = Smoothness::One;
  int n = 51;
  /// Rotation angle; NaN for isotropic points.
  double theta = std::numeric_limits<double>::quiet_NaN();
  /// Non-fatal notes such as a lattice smaller than the default.
  std::string warning;
};

struct CalibrationOptions {
  int n = 51;
  /// Accepted isotropic ranges.
  double min_range = 1.0;
  double max_range = 20.0;
  /// Search interval and tolerance on kappa_S^-1.
  double search_lo = 0.5;
  double search_hi = 60.0;
  double tol = 1e-4;
  int scan_points = 40;
  /// Coordinate-descent cycles before the simplex polish (anisotropic).
  int coordinate_cycles = 3;
  AssemblyOptions assembly;
  int workers = 1;
};

/// Objective of the isotropic calibration, ||sigma_M - sigma_S(kappa_S^-1)||.
class IsotropicObjective {
public:
  IsotropicObjective(double kappa_inv, Smoothness nu, const CalibrationOptions& options = {});
  double operator()(double kappa_s_inv);
  const Eigen::VectorXd& target() const { return target_; }
  Eigen::VectorXd sar_correlations(double kappa_s_inv);

private:
  Eigen::VectorXd target_;
  CenterCorrelation sar_;
};

/// Throws DomainError for ranges outside [min_range, max_range], nu = 1/2 or
/// an even N; CalibrationError if the objective is not unimodal on the scan.
CalibrationPoint calibrate_isotropic(double kappa_inv, Smoothness nu, const CalibrationOptions& options = {});

struct AnisotropicCalibration {
  /// Eigenvalue along the first axis (xi1^2 -> lambda1) and the second.
  CalibrationPoint first;
  CalibrationPoint second;
};

/// Fits H = U diag(l1, l2) U^T with kappa_S^2 = 1 and U fixed by theta, against
/// the Matérn field with ranges (xi1, xi2) at the same angle.
AnisotropicCalibration calibrate_anisotropic(double xi1, double xi2, double theta, Smoothness nu,
                                             const CalibrationOptions& options = {});

/// Monotone (Fritsch–Carlson) piecewise-cubic map matern_value -> sar_value.
class CalibrationTable {
public:
  struct Lookup {
    double value = 0.0;
    /// Query fell outside the knots and was clamped to the nearest end.
    bool clamped = false;
  };

  CalibrationTable() = default;
  /// Requires strictly increasing matern_value and strictly increasing
  /// sar_value; CalibrationError otherwise.
  explicit CalibrationTable(std::vector<CalibrationPoint> points);

  Lookup lookup(double matern_value) const;
  const std::vector<CalibrationPoint>& points() const { return points_; }
  bool empty() const { return points_.empty(); }
  bool anisotropic() const;

  std::string to_csv() const;
  static CalibrationTable from_csv(const std::string& text);
  void write_csv(const std::filesystem::path& path) const;
  static CalibrationTable read_csv(const std::filesystem::path& path);

private:
  std::vector<CalibrationPoint> points_;
  std::vector<double> slopes_;
};

/// One isotropic calibration per sweep entry (sorted ascending), run on
/// `options.workers` threads; results are in sweep order.
std::vector<CalibrationPoint> calibrate_sweep(std::span<const double> sweep, Smoothness nu,
                                              const CalibrationOptions& options = {});

CalibrationTable build_table(std::span<const double> sweep, Smoothness nu, const CalibrationOptions& options = {});

/// Anisotropic calibrations at xi2 = sweep[k], xi1 = ratio * sweep[k] and
/// angle theta, in sweep order.
std::vector<AnisotropicCalibration> calibrate_anisotropic_sweep(std::span<const double> sweep, double ratio,
                                                                double theta, Smoothness nu,
                                                                const CalibrationOptions& options = {});

/// Pools both axes of an anisotropic sweep into one eigenvalue map D^2 -> H,
/// averaging entries that share a D^2 eigenvalue.
CalibrationTable build_anisotropic_table(std::span<const AnisotropicCalibration> sweep);

/// Error-curve CSV with the table column layout, for any list of points.
std::string calibration_points_csv(std::span<const CalibrationPoint> points);

} // namespace nonstat
