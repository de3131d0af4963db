#include "nonstat/local_mle.hpp"

#include "nonstat/csv.hpp"
#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"
#include "nonstat/matern.hpp"
#include "nonstat/optimize.hpp"
#include "nonstat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nonstat {

void WindowSpec::validate(const Grid& grid) const {
  if (size < 3 || size % 2 == 0)
    throw ConfigError("window size must be odd and at least 3, got " + std::to_string(size));
  if (size > std::min(grid.nx, grid.ny))
    throw ConfigError("window size " + std::to_string(size) + " exceeds the lattice (" + std::to_string(grid.nx) +
                      " x " + std::to_string(grid.ny) + ")");
  if (stride < 1)
    throw ConfigError("window stride must be positive");
}

std::vector<std::size_t> WindowSpec::centers(const Grid& grid) const {
  validate(grid);
  const int r = size / 2;
  std::vector<std::size_t> out;
  for (int i = r; i < grid.ny - r; i += stride)
    for (int j = r; j < grid.nx - r; j += stride)
      out.push_back(grid.index(i, j));
  return out;
}

Window extract_window(const FieldEnsemble& ensemble, std::size_t center, const WindowSpec& spec) {
  const Grid& g = ensemble.grid;
  spec.validate(g);
  if (center >= g.interior_size())
    throw DomainError("window centre " + std::to_string(center) + " is outside the lattice");
  const int r = spec.size / 2;
  const auto [ci, cj] = g.coords(center);
  if (ci < r || cj < r || ci + r >= g.ny || cj + r >= g.nx)
    throw DomainError("window of size " + std::to_string(spec.size) + " around node " + std::to_string(center) +
                      " leaves the lattice");
  Window w;
  w.size = spec.size;
  w.h1 = g.h1;
  w.h2 = g.h2;
  const int m = spec.size * spec.size;
  const auto p = Eigen::Index(ensemble.size());
  w.data.resize(m, p);
  w.coords.reserve(std::size_t(m));
  for (int di = 0; di < spec.size; ++di) {
    for (int dj = 0; dj < spec.size; ++dj) {
      const auto k = Eigen::Index(di * spec.size + dj);
      const std::size_t node = g.index(ci - r + di, cj - r + dj);
      for (Eigen::Index rep = 0; rep < p; ++rep)
        w.data(k, rep) = ensemble.replicates[std::size_t(rep)][node];
      w.coords.emplace_back(dj * g.h1, di * g.h2);
    }
  }
  return w;
}

void FitOptions::validate() const {
  if (!(tol > 0.0))
    throw ConfigError("fit tolerance must be positive");
  if (max_iter < 1)
    throw ConfigError("fit max_iter must be positive");
  if (constraint == VarianceConstraint::SumToOne && !(init.tau2 > 0.0 && init.tau2 < 1.0))
    throw ConfigError("initial tau2 must lie in (0, 1) under the sum-to-one constraint");
  if (constraint == VarianceConstraint::None && !fix_variances && !(init.tau2 > 0.0 && init.sigma2 > 0.0))
    throw ConfigError("initial sigma2 and tau2 must be positive");
  if (init.xi1 < 0.0 || init.xi2 < 0.0 || !std::isfinite(init.theta))
    throw ConfigError("initial ranges must be non-negative and theta finite");
}

double local_negloglik(const LocalParams& params, const Window& window) {
  if (!(params.xi1 > 0.0) || !(params.xi2 > 0.0) || !(params.sigma2 >= 0.0) || !(params.tau2 >= 0.0) ||
      !std::isfinite(params.xi1 + params.xi2 + params.sigma2 + params.tau2 + params.theta))
    return std::numeric_limits<double>::infinity();
  const MaternSpec spec{params.nu, params.sigma2, AnisoTransform{params.theta, params.xi1, params.xi2}};
  const Eigen::MatrixXd g = lattice_covariance(window.size, window.h1, window.h2, spec, params.tau2);
  const Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    return std::numeric_limits<double>::infinity();
  const auto& l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    const double d = llt.matrixLLT()(k, k);
    if (!(d > 0.0))
      return std::numeric_limits<double>::infinity();
    logdet += 2.0 * std::log(d);
  }
  const Eigen::MatrixXd z = l.solve(window.data);
  const double value = 0.5 * double(window.replicates()) * logdet + 0.5 * z.squaredNorm();
  return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

namespace {

// Maps the unconstrained search vector to LocalParams and back.
class Parametrization {
public:
  Parametrization(const FitOptions& options, double default_range) : options_(options) {
    init_ = options.init;
    init_.nu = options.nu;
    if (!(init_.xi1 > 0.0))
      init_.xi1 = default_range;
    if (!(init_.xi2 > 0.0))
      init_.xi2 = default_range;
    if (options.constraint == VarianceConstraint::SumToOne)
      init_.sigma2 = 1.0 - init_.tau2;
  }

  Eigen::Index dimension() const {
    const Eigen::Index shape = options_.isotropic ? 1 : 3;
    if (options_.fix_variances)
      return shape;
    return shape + (options_.constraint == VarianceConstraint::SumToOne ? 1 : 2);
  }

  Eigen::VectorXd start() const {
    Eigen::VectorXd x(dimension());
    Eigen::Index k = 0;
    const LocalParams p = canonicalize(init_);
    x(k++) = 0.5 * std::log(p.xi1 * p.xi2);
    if (!options_.isotropic) {
      const double rho = std::log(p.xi1 / p.xi2);
      x(k++) = rho * std::cos(2.0 * p.theta);
      x(k++) = rho * std::sin(2.0 * p.theta);
    }
    if (!options_.fix_variances) {
      if (options_.constraint == VarianceConstraint::SumToOne) {
        x(k++) = std::log(p.tau2 / (1.0 - p.tau2));
      } else {
        x(k++) = std::log(p.sigma2);
        x(k++) = std::log(p.tau2);
      }
    }
    return x;
  }

  Eigen::VectorXd steps() const {
    Eigen::VectorXd s = Eigen::VectorXd::Constant(dimension(), 0.3);
    if (!options_.fix_variances)
      s.tail(options_.constraint == VarianceConstraint::SumToOne ? 1 : 2).setConstant(0.5);
    return s;
  }

  LocalParams params(const Eigen::VectorXd& x) const {
    LocalParams p = init_;
    Eigen::Index k = 0;
    const double log_g = x(k++);
    double rho = 0.0, angle = 0.0;
    if (!options_.isotropic) {
      const double a = x(k++), b = x(k++);
      rho = std::hypot(a, b);
      angle = rho > 0.0 ? std::atan2(b, a) : 0.0;
    }
    p.xi1 = std::exp(log_g + 0.5 * rho);
    p.xi2 = std::exp(log_g - 0.5 * rho);
    p.theta = angle / 2.0;
    if (!options_.fix_variances) {
      if (options_.constraint == VarianceConstraint::SumToOne) {
        const double t = 1.0 / (1.0 + std::exp(-x(k++)));
        p.tau2 = t;
        p.sigma2 = 1.0 - t;
      } else {
        p.sigma2 = std::exp(x(k++));
        p.tau2 = std::exp(x(k++));
      }
    }
    return canonicalize(p);
  }

private:
  FitOptions options_;
  LocalParams init_;
};

} // namespace

WindowFit fit_window(const Window& window, const FitOptions& options) {
  options.validate();
  if (window.replicates() < 1)
    throw DomainError("window fit needs at least one replicate");
  const Parametrization param(options, 0.5 * window.size * std::sqrt(window.h1 * window.h2));
  auto objective = [&](const Eigen::VectorXd& x) { return local_negloglik(param.params(x), window); };

  SimplexOptions so;
  so.max_iter = options.max_iter;
  so.tol = options.tol;
  SimplexResult res;
  try {
    res = nelder_mead(objective, param.start(), param.steps(), so);
  } catch (const DomainError&) {
    throw DomainError("initialization error: every vertex of the starting simplex is infeasible");
  }
  WindowFit fit;
  fit.trace = res.trace;
  fit.iterations = res.iterations;
  if (!res.converged) {
    const SimplexResult again = nelder_mead(objective, res.x, param.steps(), so);
    fit.iterations += again.iterations;
    for (double v : again.trace)
      fit.trace.push_back(std::min(v, fit.trace.empty() ? v : fit.trace.back()));
    if (again.value <= res.value) {
      res.x = again.x;
      res.value = again.value;
    }
    res.converged = again.converged;
  }
  fit.params = param.params(res.x);
  fit.converged = res.converged;
  fit.negloglik = res.value;
  return fit;
}

LocalFit fit_all_windows(const FieldEnsemble& ensemble, const WindowSpec& spec, const FitOptions& options,
                         int workers) {
  ensemble.validate();
  options.validate();
  const Grid& g = ensemble.grid;
  const std::vector<std::size_t> centers = spec.centers(g);
  std::vector<WindowFit> fits(centers.size());
  parallel_for(centers.size(), workers,
               [&](std::size_t k) { fits[k] = fit_window(extract_window(ensemble, centers[k], spec), options); });

  LocalFit out;
  out.fields.grid = g.interior();
  out.fields.nu = options.nu;
  out.fields.params.resize(g.interior_size());
  out.fields.converged.assign(g.interior_size(), 0);
  out.fields.estimated.assign(g.interior_size(), 0);

  const int r = spec.size / 2;
  const int ci_count = (g.ny - 2 * r - 1) / spec.stride + 1;
  const int cj_count = (g.nx - 2 * r - 1) / spec.stride + 1;
  std::size_t not_converged = 0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    out.windows.push_back({centers[k], fits[k].negloglik, fits[k].iterations, fits[k].converged});
    not_converged += fits[k].converged ? 0 : 1;
  }
  for (int i = 0; i < g.ny; ++i) {
    for (int j = 0; j < g.nx; ++j) {
      auto nearest = [&](int v, int count) {
        const int idx = int(std::lround(double(std::max(v - r, 0)) / spec.stride));
        return std::clamp(idx, 0, count - 1);
      };
      const int ki = nearest(i, ci_count), kj = nearest(j, cj_count);
      const std::size_t k = std::size_t(ki) * std::size_t(cj_count) + std::size_t(kj);
      const std::size_t node = g.index(i, j);
      out.fields.params[node] = fits[k].params;
      out.fields.converged[node] = fits[k].converged ? 1 : 0;
      out.fields.estimated[node] = centers[k] == node ? 1 : 0;
    }
  }
  if (!centers.empty() && double(not_converged) > 0.2 * double(centers.size()))
    out.warning = std::to_string(not_converged) + " of " + std::to_string(centers.size()) +
                  " windows did not converge";
  return out;
}

std::string window_diagnostics_csv(const std::vector<WindowDiagnostic>& windows) {
  std::string out = csv_row({"node", "negloglik", "iterations", "converged"});
  for (const auto& w : windows)
    out += csv_row({std::to_string(w.node), format_double(w.negloglik), std::to_string(w.iterations),
                    w.converged ? "1" : "0"});
  return out;
}

} // namespace nonstat
