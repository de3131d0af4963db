#include "nonstat/diagnostics.hpp"

#include "nonstat/csv.hpp"
#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"
#include "nonstat/local_mle.hpp"
#include "nonstat/matern.hpp"
#include "nonstat/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nonstat {

Field whiten(const NonstatSarModel& model, const Field& field) {
  const Grid& g = model.grid();
  if (!(field.grid == g.interior()))
    throw ShapeError("field lattice does not match the model lattice");
  field.validate();
  const bool row_weight = model.options().normalization == Normalization::RowWeight;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(Eigen::Index(g.total_size()));
  for (int i = 0; i < g.ny; ++i)
    for (int j = 0; j < g.nx; ++j) {
      const auto b = Eigen::Index(g.interior_to_buffered(i, j));
      const double s = model.sigma()(b);
      if (!(s > 0.0))
        throw DomainError("cannot whiten where sigma is zero (node " + std::to_string(g.index(i, j)) + ")");
      const double y = field.values[g.index(i, j)] / s;
      u(b) = row_weight ? y : y * std::sqrt(model.norm_diag()(b));
    }
  Eigen::VectorXd w = apply_power(model.b(), model.order(), u);
  if (row_weight)
    w = w.cwiseProduct(model.norm_diag().cwiseSqrt());
  Field out;
  out.grid = g.interior();
  out.values.resize(g.interior_size());
  for (int i = 0; i < g.ny; ++i)
    for (int j = 0; j < g.nx; ++j)
      out.values[g.index(i, j)] = w(Eigen::Index(g.interior_to_buffered(i, j)));
  return out;
}

FieldEnsemble whiten(const NonstatSarModel& model, const FieldEnsemble& ensemble, int workers) {
  FieldEnsemble out;
  out.grid = model.grid().interior();
  if (!(ensemble.grid == out.grid))
    throw ShapeError("ensemble lattice does not match the model lattice");
  out.replicates.resize(ensemble.size());
  parallel_for(ensemble.size(), workers, [&](std::size_t r) {
    out.replicates[r] = whiten(model, Field{ensemble.grid, ensemble.replicates[r]}).values;
  });
  return out;
}

namespace {

// Type-7 sample quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty())
    return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * double(sorted.size() - 1);
  const auto lo = std::size_t(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

struct PairAccumulator {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  std::size_t n = 0;
  void add(double a, double b) {
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
    ++n;
  }
  double correlation() const {
    if (n < 2)
      return std::numeric_limits<double>::quiet_NaN();
    const double dn = double(n);
    const double cov = sab - sa * sb / dn;
    const double va = saa - sa * sa / dn, vb = sbb - sb * sb / dn;
    if (!(va > 0.0) || !(vb > 0.0))
      return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
  }
};

} // namespace

WhitenessReport whiteness_stats(const FieldEnsemble& whitened, const WhitenessOptions& options) {
  whitened.validate();
  if (whitened.size() < 1)
    throw DomainError("whiteness statistics need at least one replicate");
  if (options.rim < 0 || options.pool_radius < 0)
    throw DomainError("rim and pooling radius must be non-negative");
  const Grid& g = whitened.grid;
  const int lo = options.rim, hi_i = g.ny - options.rim, hi_j = g.nx - options.rim;
  if (hi_i <= lo || hi_j <= lo)
    throw DomainError("no node survives a rim of " + std::to_string(options.rim));

  WhitenessReport rep;
  rep.options = options;
  const int radius = whitened.size() == 1 ? std::max(options.pool_radius, 2) : options.pool_radius;
  rep.pooled = radius > 0;
  rep.options.pool_radius = radius;
  rep.variance.grid = g;
  rep.variance.values.assign(g.interior_size(), std::numeric_limits<double>::quiet_NaN());

  // Per-node sums over replicates, then box sums over the neighbourhood.
  std::vector<double> s1(g.interior_size(), 0.0), s2(g.interior_size(), 0.0);
  for (const auto& r : whitened.replicates)
    for (std::size_t k = 0; k < r.size(); ++k) {
      s1[k] += r[k];
      s2[k] += r[k] * r[k];
    }
  std::vector<double> vars;
  for (int i = lo; i < hi_i; ++i) {
    for (int j = lo; j < hi_j; ++j) {
      double a = 0.0, b = 0.0;
      std::size_t count = 0;
      for (int di = -radius; di <= radius; ++di)
        for (int dj = -radius; dj <= radius; ++dj) {
          const int ii = i + di, jj = j + dj;
          if (ii < lo || ii >= hi_i || jj < lo || jj >= hi_j)
            continue;
          a += s1[g.index(ii, jj)];
          b += s2[g.index(ii, jj)];
          count += whitened.size();
        }
      const double n = double(count);
      const double v = n > 1 ? (b - a * a / n) / (n - 1.0) : std::numeric_limits<double>::quiet_NaN();
      rep.variance.values[g.index(i, j)] = v;
      if (std::isfinite(v))
        vars.push_back(v);
    }
  }
  std::sort(vars.begin(), vars.end());
  rep.variance_q05 = quantile(vars, 0.05);
  rep.variance_q50 = quantile(vars, 0.50);
  rep.variance_q95 = quantile(vars, 0.95);

  PairAccumulator h, v;
  for (const auto& r : whitened.replicates)
    for (int i = lo; i < hi_i; ++i)
      for (int j = lo; j < hi_j; ++j) {
        if (j + 1 < hi_j)
          h.add(r[g.index(i, j)], r[g.index(i, j + 1)]);
        if (i + 1 < hi_i)
          v.add(r[g.index(i, j)], r[g.index(i + 1, j)]);
      }
  rep.lag_corr_h = h.correlation();
  rep.lag_corr_v = v.correlation();
  rep.max_abs_lag = std::max(std::isfinite(rep.lag_corr_h) ? std::abs(rep.lag_corr_h) : 0.0,
                             std::isfinite(rep.lag_corr_v) ? std::abs(rep.lag_corr_v) : 0.0);
  return rep;
}

std::string WhitenessReport::summary_json() const {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["lag_corr_h"] = num(lag_corr_h);
  j["lag_corr_v"] = num(lag_corr_v);
  j["max_abs_lag"] = num(max_abs_lag);
  j["variance_q05"] = num(variance_q05);
  j["variance_q50"] = num(variance_q50);
  j["variance_q95"] = num(variance_q95);
  j["pooled"] = pooled;
  j["pool_radius"] = options.pool_radius;
  j["rim"] = options.rim;
  return j.dump(2) + "\n";
}

McDesign McDesign::full() {
  McDesign d;
  d.window_sizes = {5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25};
  d.range_multipliers = {0.25, 0.5, 0.75, 1.0};
  d.nus = {Smoothness::One, Smoothness::Two};
  d.replicate_counts = {2, 5, 10, 15, 20, 30, 40, 50, 60};
  d.repetitions = 100;
  return d;
}

std::size_t McDesign::cells() const {
  return window_sizes.size() * range_multipliers.size() * nus.size() * replicate_counts.size();
}

void McDesign::validate() const {
  if (window_sizes.empty() || range_multipliers.empty() || nus.empty() || replicate_counts.empty())
    throw ConfigError("Monte Carlo design has an empty factor");
  for (int w : window_sizes)
    if (w < 3 || w % 2 == 0)
      throw ConfigError("Monte Carlo window sizes must be odd and at least 3");
  for (double m : range_multipliers)
    if (!(m > 0.0) || !std::isfinite(m))
      throw ConfigError("range multipliers must be positive");
  for (auto nu : nus)
    if (nu == Smoothness::Half)
      throw ConfigError("Monte Carlo smoothness must be 1 or 2");
  for (int p : replicate_counts)
    if (p < 1)
      throw ConfigError("replicate counts must be positive");
  if (repetitions < 1)
    throw ConfigError("repetitions must be positive");
  if (!(sigma2 > 0.0) || !(tau2 >= 0.0))
    throw ConfigError("Monte Carlo variances must be sigma2 > 0, tau2 >= 0");
}

namespace {

std::string nu_text(Smoothness nu) { return format_double(smoothness_value(nu)); }

} // namespace

std::string McResult::raw_csv() const {
  std::string out =
      csv_row({"window", "range_multiplier", "nu", "p", "repetition", "estimate", "percent_error", "status"});
  for (const auto& e : raw)
    out += csv_row({std::to_string(e.window), format_double(e.range_multiplier), nu_text(e.nu), std::to_string(e.p),
                    std::to_string(e.repetition), format_double(e.estimate), format_double(e.percent_error),
                    e.ok ? "ok" : "failed"});
  return out;
}

std::string McResult::summary_csv() const {
  std::string out = csv_row({"window", "range_multiplier", "range", "nu", "p", "median_abs_pct_error", "q25", "q75",
                             "succeeded", "failed"});
  for (const auto& c : summary)
    out += csv_row({std::to_string(c.window), format_double(c.range_multiplier),
                    format_double(c.range_multiplier * c.window), nu_text(c.nu), std::to_string(c.p),
                    format_double(c.median), format_double(c.q25), format_double(c.q75), std::to_string(c.succeeded),
                    std::to_string(c.failed)});
  return out;
}

const McCell& McResult::cell(int window, double multiplier, Smoothness nu, int p) const {
  for (const auto& c : summary)
    if (c.window == window && c.range_multiplier == multiplier && c.nu == nu && c.p == p)
      return c;
  throw DomainError("no such Monte Carlo cell");
}

McResult run_mc_study(const McDesign& design, int workers) {
  design.validate();
  const int p_max = *std::max_element(design.replicate_counts.begin(), design.replicate_counts.end());
  const std::size_t nw = design.window_sizes.size(), nm = design.range_multipliers.size(),
                    nn = design.nus.size(), np = design.replicate_counts.size();
  const auto reps = std::size_t(design.repetitions);

  // One task per (window, range, nu, repetition); it fits every p.
  const std::size_t tasks = nw * nm * nn * reps;
  std::vector<McEstimate> raw(tasks * np);
  parallel_for(tasks, workers, [&](std::size_t t) {
    const std::size_t rep = t % reps;
    const std::size_t vi = (t / reps) % nn;
    const std::size_t mi = (t / reps / nn) % nm;
    const std::size_t wi = t / reps / nn / nm;
    const int w = design.window_sizes[wi];
    const double mult = design.range_multipliers[mi];
    const Smoothness nu = design.nus[vi];
    const double range = mult * w;

    McEstimate base;
    base.window = w;
    base.range_multiplier = mult;
    base.nu = nu;
    base.repetition = int(rep);
    Window window;
    std::string draw_error;
    try {
      const MaternSpec spec{nu, design.sigma2, AnisoTransform::isotropic(range)};
      const Eigen::MatrixXd cov = lattice_covariance(w, 1.0, 1.0, spec, design.tau2);
      const Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success)
        throw FactorizationError("window covariance is not positive definite", -1);
      const auto m = Eigen::Index(w) * w;
      NormalStream normal(design.seed, t, 0);
      Eigen::MatrixXd z(m, p_max);
      for (Eigen::Index r = 0; r < p_max; ++r)
        for (Eigen::Index k = 0; k < m; ++k)
          z(k, r) = normal();
      window.size = w;
      window.data = llt.matrixL() * z;
      for (int di = 0; di < w; ++di)
        for (int dj = 0; dj < w; ++dj)
          window.coords.emplace_back(double(dj), double(di));
    } catch (const Error& e) {
      draw_error = e.what();
    }

    for (std::size_t pi = 0; pi < np; ++pi) {
      McEstimate est = base;
      est.p = design.replicate_counts[pi];
      if (!draw_error.empty()) {
        est.ok = false;
        est.error = draw_error;
      } else {
        try {
          Window sub = window;
          sub.data = window.data.leftCols(est.p);
          FitOptions fo;
          fo.constraint = VarianceConstraint::None;
          fo.isotropic = true;
          fo.fix_variances = true;
          fo.nu = nu;
          fo.init = LocalParams{0.0, 0.0, 0.0, design.sigma2, design.tau2, nu};
          const WindowFit fit = fit_window(sub, fo);
          est.estimate = fit.params.mean_range();
          est.percent_error = 100.0 * std::abs(est.estimate - range) / range;
        } catch (const Error& e) {
          est.ok = false;
          est.error = e.what();
        }
      }
      raw[t * np + pi] = est;
    }
  });

  McResult result;
  // Raw rows ordered by cell (window, range, nu, p) then repetition.
  for (std::size_t wi = 0; wi < nw; ++wi)
    for (std::size_t mi = 0; mi < nm; ++mi)
      for (std::size_t vi = 0; vi < nn; ++vi)
        for (std::size_t pi = 0; pi < np; ++pi) {
          McCell cell;
          cell.window = design.window_sizes[wi];
          cell.range_multiplier = design.range_multipliers[mi];
          cell.nu = design.nus[vi];
          cell.p = design.replicate_counts[pi];
          std::vector<double> errs;
          for (std::size_t rep = 0; rep < reps; ++rep) {
            const std::size_t t = ((wi * nm + mi) * nn + vi) * reps + rep;
            const McEstimate& e = raw[t * np + pi];
            result.raw.push_back(e);
            if (e.ok) {
              errs.push_back(e.percent_error);
              ++cell.succeeded;
            } else {
              ++cell.failed;
            }
          }
          std::sort(errs.begin(), errs.end());
          cell.median = quantile(errs, 0.5);
          cell.q25 = quantile(errs, 0.25);
          cell.q75 = quantile(errs, 0.75);
          result.summary.push_back(cell);
        }
  return result;
}

} // namespace nonstat
