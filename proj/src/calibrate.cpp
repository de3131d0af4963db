#include "nonstat/calibrate.hpp"

#include "nonstat/csv.hpp"
#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"
#include "nonstat/optimize.hpp"
#include "nonstat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace nonstat {

namespace {

constexpr int kDefaultLattice = 51;

void check_lattice(int n) {
  if (n < 1 || n % 2 == 0)
    throw DomainError("calibration lattice size must be odd and positive, got " + std::to_string(n));
}

void check_nu(Smoothness nu) {
  if (nu == Smoothness::Half)
    throw DomainError("calibration needs nu = 1 or nu = 2");
}

std::string lattice_warning(int n) {
  if (n >= kDefaultLattice)
    return {};
  return "lattice N=" + std::to_string(n) + " is smaller than " + std::to_string(kDefaultLattice) +
         "; edge effects grow";
}

} // namespace

Eigen::VectorXd matern_center_correlations(const AnisoTransform& transform, Smoothness nu, int n) {
  check_lattice(n);
  transform.validate();
  const Eigen::Matrix2d a = transform.matrix();
  const int c = n / 2;
  Eigen::VectorXd out(Eigen::Index(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d lag(double(j - c), double(i - c));
      out(Eigen::Index(i) * n + j) = matern_correlation((a * lag).norm(), nu);
    }
  }
  out(Eigen::Index(c) * n + c) = 1.0;
  return out;
}

Eigen::VectorXd matern_center_correlations(double kappa_inv, Smoothness nu, int n) {
  return matern_center_correlations(AnisoTransform::isotropic(kappa_inv), nu, n);
}

double relative_error(std::span<const double> sigma_m, std::span<const double> sigma_s) {
  if (sigma_m.size() != sigma_s.size())
    throw ShapeError("relative_error: vectors have lengths " + std::to_string(sigma_m.size()) + " and " +
                     std::to_string(sigma_s.size()));
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < sigma_m.size(); ++k) {
    const double d = sigma_m[k] - sigma_s[k];
    num += d * d;
    den += sigma_s[k] * sigma_s[k];
  }
  if (!(den > 0.0))
    throw DegenerateError("relative_error: reference vector is zero", {});
  return std::sqrt(num) / std::sqrt(den);
}

double relative_error(const Eigen::VectorXd& sigma_m, const Eigen::VectorXd& sigma_s) {
  return relative_error(std::span<const double>(sigma_m.data(), std::size_t(sigma_m.size())),
                        std::span<const double>(sigma_s.data(), std::size_t(sigma_s.size())));
}

IsotropicObjective::IsotropicObjective(double kappa_inv, Smoothness nu, const CalibrationOptions& options)
    : target_(matern_center_correlations(kappa_inv, nu, options.n)),
      sar_(options.n, sar_order(nu), options.assembly) {}

Eigen::VectorXd IsotropicObjective::sar_correlations(double kappa_s_inv) {
  return sar_(SarSpec::isotropic(1.0 / (kappa_s_inv * kappa_s_inv)));
}

double IsotropicObjective::operator()(double kappa_s_inv) { return (target_ - sar_correlations(kappa_s_inv)).norm(); }

CalibrationPoint calibrate_isotropic(double kappa_inv, Smoothness nu, const CalibrationOptions& options) {
  check_nu(nu);
  check_lattice(options.n);
  if (!(kappa_inv >= options.min_range && kappa_inv <= options.max_range))
    throw DomainError("range " + format_double(kappa_inv) + " outside the calibrated interval [" +
                      format_double(options.min_range) + ", " + format_double(options.max_range) + "]");
  IsotropicObjective objective(kappa_inv, nu, options);
  auto feasible = [&](double x) {
    try {
      return objective(x);
    } catch (const FactorizationError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const ScalarMinimum best = bracketed_minimum(feasible, options.search_lo,
                                               options.search_hi, options.scan_points, options.tol);
  CalibrationPoint pt;
  pt.matern_value = kappa_inv;
  pt.sar_value = best.x;
  pt.rel_err_cal = relative_error(objective.target(), objective.sar_correlations(best.x));
  pt.rel_err_naive = relative_error(objective.target(), objective.sar_correlations(kappa_inv));
  pt.nu = nu;
  pt.n = options.n;
  pt.warning = lattice_warning(options.n);
  return pt;
}

AnisotropicCalibration calibrate_anisotropic(double xi1, double xi2, double theta, Smoothness nu,
                                             const CalibrationOptions& options) {
  check_nu(nu);
  check_lattice(options.n);
  const AnisoTransform transform{theta, xi1, xi2};
  transform.validate();
  if (!std::isfinite(theta))
    throw DomainError("rotation angle must be finite");

  const Eigen::VectorXd target = matern_center_correlations(transform, nu, options.n);
  CenterCorrelation sar(options.n, sar_order(nu), options.assembly);
  auto correlations = [&](double l1, double l2) { return sar(SarSpec::from_eigen(1.0, l1, l2, theta)); };
  auto objective = [&](double l1, double l2) {
    try {
      return (target - correlations(l1, l2)).norm();
    } catch (const FactorizationError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const double naive1 = xi1 * xi1, naive2 = xi2 * xi2;
  double l1 = naive1, l2 = naive2;
  for (int cycle = 0; cycle < options.coordinate_cycles; ++cycle) {
    const double spread = cycle == 0 ? 8.0 : 2.0;
    const int points = cycle == 0 ? 15 : 9;
    l1 = bracketed_minimum([&](double v) { return objective(v, l2); }, l1 / spread, l1 * spread, points,
                           options.tol * l1)
             .x;
    l2 = bracketed_minimum([&](double v) { return objective(l1, v); }, l2 / spread, l2 * spread, points,
                           options.tol * l2)
             .x;
  }
  const Eigen::Vector2d start(std::log(l1), std::log(l2));
  SimplexOptions polish;
  polish.tol = options.tol;
  polish.max_iter = 500;
  const SimplexResult nm = nelder_mead(
      [&](const Eigen::VectorXd& x) { return objective(std::exp(x(0)), std::exp(x(1))); }, start,
      Eigen::Vector2d(0.05, 0.05), polish);
  if (nm.value <= objective(l1, l2)) {
    l1 = std::exp(nm.x(0));
    l2 = std::exp(nm.x(1));
  }

  const double err_cal = relative_error(target, correlations(l1, l2));
  const double err_naive = relative_error(target, correlations(naive1, naive2));
  AnisotropicCalibration out;
  for (auto* pt : {&out.first, &out.second}) {
    pt->rel_err_cal = err_cal;
    pt->rel_err_naive = err_naive;
    pt->nu = nu;
    pt->n = options.n;
    pt->theta = theta;
    pt->warning = lattice_warning(options.n);
  }
  out.first.matern_value = naive1;
  out.first.sar_value = l1;
  out.second.matern_value = naive2;
  out.second.sar_value = l2;
  return out;
}

CalibrationTable::CalibrationTable(std::vector<CalibrationPoint> points) : points_(std::move(points)) {
  if (points_.empty())
    throw CalibrationError("calibration table needs at least one point");
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& p = points_[k];
    if (!std::isfinite(p.matern_value) || !std::isfinite(p.sar_value) || !(p.sar_value > 0.0))
      throw CalibrationError("calibration table entry " + std::to_string(k) + " is not finite and positive");
    if (k == 0)
      continue;
    if (!(p.matern_value > points_[k - 1].matern_value))
      throw CalibrationError("calibration table ranges must be strictly increasing (entry " + std::to_string(k) +
                             ")");
    if (!(p.sar_value > points_[k - 1].sar_value))
      throw CalibrationError("calibration output is not monotone: " + format_double(points_[k - 1].sar_value) +
                             " at " + format_double(points_[k - 1].matern_value) + " then " +
                             format_double(p.sar_value) + " at " + format_double(p.matern_value));
  }

  // Fritsch–Carlson slopes: harmonic-mean interior slopes, zero at extrema,
  // one-sided three-point ends limited to keep the shape monotone.
  const std::size_t n = points_.size();
  slopes_.assign(n, 0.0);
  if (n == 1)
    return;
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = points_[k + 1].matern_value - points_[k].matern_value;
    delta[k] = (points_[k + 1].sar_value - points_[k].sar_value) / h[k];
  }
  if (n == 2) {
    slopes_[0] = slopes_[1] = delta[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) {
      slopes_[k] = 0.0;
    } else {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      slopes_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(s) > std::abs(3.0 * d0))
      s = 3.0 * d0;
    return s;
  };
  slopes_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  slopes_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

CalibrationTable::Lookup CalibrationTable::lookup(double matern_value) const {
  if (points_.empty())
    throw CalibrationError("lookup in an empty calibration table");
  if (!std::isfinite(matern_value))
    throw DomainError("calibration lookup needs a finite range");
  if (matern_value <= points_.front().matern_value)
    return {points_.front().sar_value, matern_value < points_.front().matern_value};
  if (matern_value >= points_.back().matern_value)
    return {points_.back().sar_value, matern_value > points_.back().matern_value};
  const auto it = std::upper_bound(points_.begin(), points_.end(), matern_value,
                                   [](double v, const CalibrationPoint& p) { return v < p.matern_value; });
  const auto k = std::size_t(it - points_.begin()) - 1;
  const double x0 = points_[k].matern_value, x1 = points_[k + 1].matern_value;
  const double y0 = points_[k].sar_value, y1 = points_[k + 1].sar_value;
  if (matern_value == x0)
    return {y0, false};
  const double h = x1 - x0;
  const double t = (matern_value - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return {h00 * y0 + h10 * h * slopes_[k] + h01 * y1 + h11 * h * slopes_[k + 1], false};
}

bool CalibrationTable::anisotropic() const { return !points_.empty() && std::isfinite(points_.front().theta); }

std::string calibration_points_csv(std::span<const CalibrationPoint> points) {
  std::string out = csv_row({"nu", "N", "theta", "matern_value", "sar_value", "rel_err_cal", "rel_err_naive"});
  for (const auto& p : points)
    out += csv_row({format_double(smoothness_value(p.nu)), std::to_string(p.n), format_double(p.theta),
                    format_double(p.matern_value), format_double(p.sar_value), format_double(p.rel_err_cal),
                    format_double(p.rel_err_naive)});
  return out;
}

std::string CalibrationTable::to_csv() const { return calibration_points_csv(points_); }

CalibrationTable CalibrationTable::from_csv(const std::string& text) {
  const CsvTable csv = parse_csv(text);
  std::vector<CalibrationPoint> points;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    CalibrationPoint p;
    p.nu = smoothness_from(csv.number(r, "nu"));
    const double n = csv.number(r, "N");
    if (n != std::floor(n) || n < 1)
      throw FormatError("N", "lattice size must be a positive integer");
    p.n = int(n);
    p.theta = csv.number(r, "theta");
    p.matern_value = csv.number(r, "matern_value");
    p.sar_value = csv.number(r, "sar_value");
    p.rel_err_cal = csv.number(r, "rel_err_cal");
    p.rel_err_naive = csv.number(r, "rel_err_naive");
    if (!points.empty() && p.nu != points.front().nu)
      throw FormatError("nu", "calibration table mixes smoothness values");
    points.push_back(p);
  }
  return CalibrationTable(std::move(points));
}

void CalibrationTable::write_csv(const std::filesystem::path& path) const { write_file_bytes(path, to_csv()); }

CalibrationTable CalibrationTable::read_csv(const std::filesystem::path& path) {
  return from_csv(read_file_bytes(path));
}

std::vector<CalibrationPoint> calibrate_sweep(std::span<const double> sweep, Smoothness nu,
                                              const CalibrationOptions& options) {
  if (!std::is_sorted(sweep.begin(), sweep.end()))
    throw DomainError("calibration sweep must be sorted ascending");
  std::vector<CalibrationPoint> out(sweep.size());
  parallel_for(sweep.size(), options.workers,
               [&](std::size_t k) { out[k] = calibrate_isotropic(sweep[k], nu, options); });
  return out;
}

CalibrationTable build_table(std::span<const double> sweep, Smoothness nu, const CalibrationOptions& options) {
  return CalibrationTable(calibrate_sweep(sweep, nu, options));
}

std::vector<AnisotropicCalibration> calibrate_anisotropic_sweep(std::span<const double> sweep, double ratio,
                                                                double theta, Smoothness nu,
                                                                const CalibrationOptions& options) {
  if (!std::is_sorted(sweep.begin(), sweep.end()))
    throw DomainError("calibration sweep must be sorted ascending");
  if (!(ratio >= 1.0))
    throw DomainError("anisotropy ratio must be at least 1");
  std::vector<AnisotropicCalibration> out(sweep.size());
  parallel_for(sweep.size(), options.workers, [&](std::size_t k) {
    out[k] = calibrate_anisotropic(ratio * sweep[k], sweep[k], theta, nu, options);
  });
  return out;
}

CalibrationTable build_anisotropic_table(std::span<const AnisotropicCalibration> sweep) {
  struct Acc {
    CalibrationPoint point;
    int count = 0;
  };
  std::map<double, Acc> pooled;
  for (const auto& cal : sweep) {
    for (const auto* pt : {&cal.first, &cal.second}) {
      auto& acc = pooled[pt->matern_value];
      if (acc.count == 0) {
        acc.point = *pt;
      } else {
        acc.point.sar_value += pt->sar_value;
        acc.point.rel_err_cal += pt->rel_err_cal;
        acc.point.rel_err_naive += pt->rel_err_naive;
      }
      ++acc.count;
    }
  }
  std::vector<CalibrationPoint> points;
  for (auto& [key, acc] : pooled) {
    acc.point.sar_value /= acc.count;
    acc.point.rel_err_cal /= acc.count;
    acc.point.rel_err_naive /= acc.count;
    points.push_back(acc.point);
  }
  return CalibrationTable(std::move(points));
}

} // namespace nonstat
