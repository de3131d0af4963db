#include "nonstat/optimize.hpp"

#include "nonstat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nonstat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

} // namespace

ScalarMinimum golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = finite_or_inf(f(c));
  double fd = finite_or_inf(f(d));
  int evals = 2;
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = finite_or_inf(f(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = finite_or_inf(f(d));
    }
    ++evals;
  }
  return fc <= fd ? ScalarMinimum{c, fc, evals} : ScalarMinimum{d, fd, evals};
}

ScalarMinimum bracketed_minimum(const std::function<double(double)>& f, double lo, double hi, int points,
                                double tol, double unimodal_slack) {
  if (!(lo > 0.0) || !(hi > lo) || points < 3)
    throw DomainError("bracketed_minimum needs 0 < lo < hi and at least 3 scan points");
  std::vector<double> xs(static_cast<std::size_t>(points)), fs(static_cast<std::size_t>(points));
  const double step = std::log(hi / lo) / double(points - 1);
  for (int k = 0; k < points; ++k) {
    xs[std::size_t(k)] = k + 1 == points ? hi : lo * std::exp(step * k);
    fs[std::size_t(k)] = finite_or_inf(f(xs[std::size_t(k)]));
  }
  const auto best = std::size_t(std::min_element(fs.begin(), fs.end()) - fs.begin());
  if (!std::isfinite(fs[best]))
    throw CalibrationError("objective is not finite anywhere on the scan");

  // Any other interior local minimum that is not within slack of the global
  // one means the unimodality assumption is broken.
  for (std::size_t k = 1; k + 1 < fs.size(); ++k) {
    if (k == best || std::abs(int(k) - int(best)) <= 1)
      continue;
    if (fs[k] < fs[k - 1] && fs[k] < fs[k + 1]) {
      const double rise = std::min(fs[k - 1], fs[k + 1]) - fs[k];
      if (rise > unimodal_slack * std::max(1e-300, std::abs(fs[k])))
        throw CalibrationError("objective has several local minima on the scan (x=" + std::to_string(xs[k]) +
                               " and x=" + std::to_string(xs[best]) + ")");
    }
  }
  const double a = xs[best == 0 ? 0 : best - 1];
  const double b = xs[std::min(best + 1, xs.size() - 1)];
  auto refined = golden_section(f, a, b, tol);
  refined.evaluations += points;
  if (fs[best] < refined.value)
    return {xs[best], fs[best], refined.evaluations};
  return refined;
}

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& step, const SimplexOptions& options) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> verts(std::size_t(n + 1), x0);
  std::vector<double> vals(std::size_t(n + 1));
  for (Eigen::Index k = 0; k < n; ++k)
    verts[std::size_t(k + 1)](k) += step(k);
  SimplexResult res;
  for (std::size_t k = 0; k < verts.size(); ++k) {
    vals[k] = finite_or_inf(f(verts[k]));
    ++res.evaluations;
  }
  if (std::none_of(vals.begin(), vals.end(), [](double v) { return std::isfinite(v); }))
    throw DomainError("every vertex of the starting simplex is infeasible");

  std::vector<std::size_t> order(verts.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> v2;
    std::vector<double> f2;
    for (auto k : order) {
      v2.push_back(verts[k]);
      f2.push_back(vals[k]);
    }
    verts.swap(v2);
    vals.swap(f2);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t k = 1; k < verts.size(); ++k)
      d = std::max(d, (verts[k] - verts[0]).cwiseAbs().maxCoeff());
    return d;
  };
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    return finite_or_inf(f(x));
  };

  sort_simplex();
  const std::size_t worst = std::size_t(n);
  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    if (diameter() < options.tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < worst; ++k)
      centroid += verts[k];
    centroid /= double(n);

    const Eigen::VectorXd xr = centroid + (centroid - verts[worst]);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - verts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        verts[worst] = xe;
        vals[worst] = fe;
      } else {
        verts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[worst - 1]) {
      verts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (verts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[worst])) {
        verts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t k = 1; k < verts.size(); ++k) {
          verts[k] = verts[0] + 0.5 * (verts[k] - verts[0]);
          vals[k] = eval(verts[k]);
        }
      }
    }
    sort_simplex();
    res.trace.push_back(vals[0]);
  }
  if (!res.converged && diameter() < options.tol)
    res.converged = true;
  res.x = verts[0];
  res.value = vals[0];
  return res;
}

} // namespace nonstat
