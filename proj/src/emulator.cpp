#include "nonstat/emulator.hpp"

#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"
#include "nonstat/matern.hpp"
#include "nonstat/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace nonstat {

namespace {

// Ranges and angle of the anisotropy after mapping physical coordinates to
// grid units (u = S^-1 s, S = diag(h1, h2)): H' = S^-1 H S^-1.
struct GridShape {
  double xi1;
  double xi2;
  double theta;
};

GridShape to_grid_units(const LocalParams& p, double h1, double h2) {
  if (h1 == 1.0 && h2 == 1.0)
    return {p.xi1, p.xi2, p.theta};
  const Eigen::Matrix2d h = AnisoTransform{p.theta, p.xi1, p.xi2}.h_matrix();
  const Eigen::Matrix2d s_inv = Eigen::Vector2d(1.0 / h1, 1.0 / h2).asDiagonal();
  const Eigen::Matrix2d hg = s_inv * h * s_inv;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(hg);
  // Eigenvalues ascending; the major axis is the second eigenvector.
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  LocalParams g;
  g.xi1 = std::sqrt(eig.eigenvalues()(1));
  g.xi2 = std::sqrt(eig.eigenvalues()(0));
  g.theta = std::atan2(major(1), major(0));
  g = canonicalize(g);
  return {g.xi1, g.xi2, g.theta};
}

int clamp_index(int v, int lo, int hi) { return std::clamp(v, lo, hi); }

std::string describe(const SarSpec& s) {
  return "kappa2=" + format_double(s.kappa2) + " H=[" + format_double(s.h11) + ", " + format_double(s.h12) + "; " +
         format_double(s.h12) + ", " + format_double(s.h22) + "]";
}

} // namespace

int default_buffer(const ParamFields& params) {
  double largest = 0.0;
  for (const auto& p : params.params) {
    const GridShape g = to_grid_units(p, params.grid.h1, params.grid.h2);
    largest = std::max(largest, g.xi1);
  }
  return std::max(10, int(std::ceil(2.0 * largest)));
}

SpecField translate_params(const ParamFields& params, const CalibrationTable& iso, const CalibrationTable* aniso,
                           int buffer) {
  params.validate();
  if (iso.empty() || iso.anisotropic())
    throw ConfigError("translation needs an isotropic calibration table");
  if (aniso && (aniso->empty() || !aniso->anisotropic()))
    throw ConfigError("anisotropic calibration table has no angle column");
  const int buf = buffer < 0 ? default_buffer(params) : buffer;
  const Grid& g = params.grid;
  SpecField out;
  out.grid = g.with_buffer(buf);
  out.clamped.assign(g.interior_size(), 0);

  std::vector<SarSpec> interior(g.interior_size());
  for (std::size_t k = 0; k < interior.size(); ++k) {
    const GridShape shape = to_grid_units(params.params[k], g.h1, g.h2);
    const double xg = std::sqrt(shape.xi1 * shape.xi2);
    const auto scale = iso.lookup(xg);
    bool clamped = scale.clamped;
    double m1 = shape.xi1 * shape.xi1, m2 = shape.xi2 * shape.xi2;
    if (aniso) {
      const auto l1 = aniso->lookup(m1), l2 = aniso->lookup(m2);
      clamped = clamped || l1.clamped || l2.clamped;
      m1 = l1.value;
      m2 = l2.value;
    }
    const double norm = std::sqrt(m1 * m2);
    interior[k] = SarSpec::from_eigen(1.0 / (scale.value * scale.value), m1 / norm, m2 / norm, shape.theta);
    out.clamped[k] = clamped ? 1 : 0;
  }

  out.specs.resize(out.grid.total_size());
  for (int i = 0; i < out.grid.total_ny(); ++i) {
    for (int j = 0; j < out.grid.total_nx(); ++j) {
      const int ii = clamp_index(i - buf, 0, g.ny - 1), jj = clamp_index(j - buf, 0, g.nx - 1);
      out.specs[out.grid.buffered_index(i, j)] = interior[g.index(ii, jj)];
    }
  }
  return out;
}

NonstatSarModel build_global_model(const SpecField& specs, std::span<const double> sigma,
                                   std::span<const double> tau2, const ModelOptions& options) {
  const Grid& g = specs.grid;
  g.validate();
  if (options.order != 1 && options.order != 2)
    throw DomainError("SAR order must be 1 or 2");
  if (sigma.size() != g.interior_size())
    throw ShapeError("sigma field has " + std::to_string(sigma.size()) + " entries, lattice has " +
                     std::to_string(g.interior_size()));
  if (!tau2.empty() && tau2.size() != g.interior_size())
    throw ShapeError("tau2 field has wrong length");
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw DomainError("sigma must be non-negative and finite");

  NonstatSarModel m;
  m.grid_ = g;
  m.options_ = options;
  Grid unit = g;
  unit.h1 = unit.h2 = 1.0;
  m.b_ = assemble_B(unit, specs.specs, options.assembly);
  m.q_ = precision(m.b_, options.order);
  try {
    m.factor_ = std::make_shared<const CholeskyFactor>(m.q_);
  } catch (const FactorizationError& e) {
    std::string msg = e.what();
    if (e.pivot() >= 0)
      msg += " (" + describe(specs.specs[std::size_t(e.pivot())]) + ")";
    throw FactorizationError(msg, e.pivot());
  }
  m.norm_diag_ = m.factor_->inverse_diagonal();

  m.sigma_.resize(Eigen::Index(g.total_size()));
  for (int i = 0; i < g.total_ny(); ++i)
    for (int j = 0; j < g.total_nx(); ++j) {
      const int ii = clamp_index(i - g.buffer, 0, g.ny - 1), jj = clamp_index(j - g.buffer, 0, g.nx - 1);
      m.sigma_(Eigen::Index(g.buffered_index(i, j))) = sigma[g.index(ii, jj)];
    }
  m.tau2_ = Eigen::VectorXd::Zero(Eigen::Index(g.interior_size()));
  for (std::size_t k = 0; k < tau2.size(); ++k)
    m.tau2_(Eigen::Index(k)) = tau2[k];

  if (options.normalization == Normalization::RowWeight) {
    // Weighted operator W = diag(sqrt(d)) B^order, precision W^T W.
    SparseRowMatrix bo = m.b_.matrix;
    if (options.order == 2)
      bo = SparseRowMatrix(m.b_.matrix * m.b_.matrix);
    const Eigen::VectorXd w = m.norm_diag_.cwiseSqrt();
    const SparseRowMatrix wb = w.asDiagonal() * bo;
    m.q_weighted_.matrix = SparseRowMatrix(wb.transpose() * wb);
    m.q_weighted_.matrix.makeCompressed();
    m.factor_weighted_ = std::make_shared<const CholeskyFactor>(m.q_weighted_);
  }
  return m;
}

Eigen::VectorXd NonstatSarModel::marginal_variance() const {
  const SparseOperator& prec = options_.normalization == Normalization::RowWeight ? q_weighted_ : q_;
  const Eigen::VectorXd diag = CholeskyFactor(prec).inverse_diagonal();
  Eigen::VectorXd out(Eigen::Index(grid_.interior_size()));
  for (int i = 0; i < grid_.ny; ++i)
    for (int j = 0; j < grid_.nx; ++j) {
      const auto b = Eigen::Index(grid_.interior_to_buffered(i, j));
      const double s2 = sigma_(b) * sigma_(b);
      const double v = options_.normalization == Normalization::RowWeight ? diag(b) : diag(b) / norm_diag_(b);
      out(Eigen::Index(grid_.index(i, j))) = s2 * v;
    }
  return out;
}

NonstatSarModel build_from_params(const ParamFields& params, const CalibrationTable& iso,
                                  const CalibrationTable* aniso, const ModelOptions& options, int buffer) {
  const SpecField specs = translate_params(params, iso, aniso, buffer);
  std::vector<double> sigma(params.params.size()), tau2(params.params.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    sigma[k] = std::sqrt(params.params[k].sigma2);
    tau2[k] = params.params[k].tau2;
  }
  NonstatSarModel model = build_global_model(specs, sigma, tau2, options);
  std::size_t clamped = 0;
  for (auto c : specs.clamped)
    clamped += c;
  model.provenance["buffer"] = std::to_string(specs.grid.buffer);
  model.provenance["clamped_nodes"] = std::to_string(clamped);
  return model;
}

FieldEnsemble simulate_ensemble(const NonstatSarModel& model, int n, std::uint64_t seed, int workers) {
  if (n < 0)
    throw DomainError("number of draws must be non-negative");
  const Grid& g = model.grid();
  FieldEnsemble out;
  out.grid = g.interior();
  out.replicates.resize(std::size_t(n));
  const auto total = Eigen::Index(g.total_size());
  const bool row_weight = model.options().normalization == Normalization::RowWeight;
  const Eigen::VectorXd inv_sqrt_d = model.norm_diag().cwiseSqrt().cwiseInverse();

  parallel_for(std::size_t(n), workers, [&](std::size_t r) {
    NormalStream normal(seed, r, 0);
    Eigen::VectorXd e(total);
    for (Eigen::Index k = 0; k < total; ++k)
      e(k) = normal();
    if (row_weight)
      e = e.cwiseProduct(inv_sqrt_d);
    Eigen::VectorXd y = solve_power(model.b(), model.order(), model.factor(), e);
    if (!row_weight)
      y = y.cwiseProduct(inv_sqrt_d);
    y = y.cwiseProduct(model.sigma());

    std::vector<double> field(g.interior_size());
    for (int i = 0; i < g.ny; ++i)
      for (int j = 0; j < g.nx; ++j)
        field[g.index(i, j)] = y(Eigen::Index(g.interior_to_buffered(i, j)));
    if (model.options().add_nugget) {
      NormalStream nugget(seed, r, 1);
      for (std::size_t k = 0; k < field.size(); ++k)
        field[k] += std::sqrt(model.tau2()(Eigen::Index(k))) * nugget();
    }
    out.replicates[r] = std::move(field);
  });
  return out;
}

Eigen::VectorXd covariance_column(const NonstatSarModel& model, std::size_t buffered_node) {
  const auto n = Eigen::Index(model.grid().total_size());
  if (Eigen::Index(buffered_node) >= n)
    throw DomainError("node outside the buffered lattice");
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  unit(Eigen::Index(buffered_node)) = 1.0;
  if (const CholeskyFactor* w = model.weighted_factor())
    return w->solve(unit);
  const Eigen::VectorXd s = model.norm_diag().cwiseSqrt().cwiseInverse();
  return s(Eigen::Index(buffered_node)) * s.cwiseProduct(model.factor().solve(unit));
}

Field correlation_map(const NonstatSarModel& model, std::size_t node) {
  const Grid& g = model.grid();
  if (node >= g.interior_size())
    throw DomainError("correlation-map node " + std::to_string(node) + " is outside the lattice");
  const auto [ci, cj] = g.coords(node);
  const auto src = g.interior_to_buffered(ci, cj);
  const Eigen::VectorXd col = covariance_column(model, src);
  Eigen::VectorXd var;
  if (const CholeskyFactor* w = model.weighted_factor())
    var = w->inverse_diagonal();
  else
    var = Eigen::VectorXd::Ones(col.size());
  Field out;
  out.grid = g.interior();
  out.values.resize(g.interior_size());
  const double vs = var(Eigen::Index(src));
  for (int i = 0; i < g.ny; ++i)
    for (int j = 0; j < g.nx; ++j) {
      const auto b = Eigen::Index(g.interior_to_buffered(i, j));
      out.values[g.index(i, j)] = std::clamp(col(b) / std::sqrt(var(b) * vs), -1.0, 1.0);
    }
  out.values[node] = 1.0;
  return out;
}

} // namespace nonstat
