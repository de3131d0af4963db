#include "nonstat/sar.hpp"

#include "nonstat/errors.hpp"
#include "nonstat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nonstat {

SarSpec SarSpec::from_eigen(double kappa2, double l1, double l2, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {kappa2, l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c};
}

void SarSpec::validate() const {
  if (!(kappa2 > 0.0) || !std::isfinite(kappa2))
    throw DomainError("kappa2 must be positive and finite");
  if (!(h11 > 0.0) || !(h22 > 0.0) || !(h11 * h22 - h12 * h12 > 0.0) || !std::isfinite(h12))
    throw DomainError("anisotropy matrix H must be symmetric positive definite");
}

double Stencil3x3::sum() const {
  double s = 0.0;
  for (double v : w)
    s += v;
  return s;
}

Stencil3x3 build_stencil(const SarSpec& spec, double h1, double h2, CrossTerm cross) {
  if (!(spec.h11 > 0.0) || !(spec.h22 > 0.0) || !(spec.h11 * spec.h22 - spec.h12 * spec.h12 > 0.0))
    throw DomainError("anisotropy matrix H must be symmetric positive definite");
  if (!(h1 > 0.0) || !(h2 > 0.0))
    throw DomainError("grid spacings must be positive");
  Stencil3x3 st;
  const double e1 = spec.h11 / (h1 * h1);
  const double e2 = spec.h22 / (h2 * h2);
  const double c = (cross == CrossTerm::Centered ? 0.5 : 2.0) * spec.h12 / (h1 * h2);
  st.at(0, 0) = spec.kappa2 + 2.0 * e1 + 2.0 * e2;
  st.at(-1, 0) = st.at(1, 0) = -e1;
  st.at(0, -1) = st.at(0, 1) = -e2;
  st.at(-1, 1) = c;  // top-left
  st.at(1, -1) = c;  // bottom-right
  st.at(1, 1) = -c;  // top-right
  st.at(-1, -1) = -c; // bottom-left
  return st;
}

SparseOperator assemble_B(const Grid& grid, std::span<const SarSpec> specs, const AssemblyOptions& options) {
  grid.validate();
  if (specs.size() != grid.total_size())
    throw ShapeError("spec field has " + std::to_string(specs.size()) + " entries, buffered grid needs " +
                     std::to_string(grid.total_size()));
  if (options.boundary == Boundary::Truncate && grid.buffer == 0)
    throw ConfigError("truncated boundary rows need a buffer of at least one node");

  const int tnx = grid.total_nx(), tny = grid.total_ny();
  const auto n = Eigen::Index(grid.total_size());
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(std::size_t(n) * 9);

  for (int i = 0; i < tny; ++i) {
    for (int j = 0; j < tnx; ++j) {
      const auto row = int(grid.buffered_index(i, j));
      const auto& spec = specs[std::size_t(row)];
      try {
        spec.validate();
      } catch (const DomainError& e) {
        throw DomainError("node " + std::to_string(row) + ": " + e.what());
      }
      const Stencil3x3 st = build_stencil(spec, grid.h1, grid.h2, options.cross);
      bool clipped = false;
      double off_sum = 0.0;
      for (int ds2 = -1; ds2 <= 1; ++ds2) {
        for (int ds1 = -1; ds1 <= 1; ++ds1) {
          if (ds1 == 0 && ds2 == 0)
            continue;
          const double w = st.at(ds1, ds2);
          const int ni = i + ds2, nj = j + ds1;
          if (ni < 0 || ni >= tny || nj < 0 || nj >= tnx) {
            clipped = clipped || w != 0.0;
            continue;
          }
          if (w == 0.0)
            continue;
          off_sum += w;
          triplets.emplace_back(row, int(grid.buffered_index(ni, nj)), w);
        }
      }
      const double center =
          (clipped && options.boundary == Boundary::Clip) ? spec.kappa2 - off_sum : st.center();
      triplets.emplace_back(row, row, center);
    }
  }
  SparseOperator b;
  b.matrix.resize(n, n);
  b.matrix.setFromTriplets(triplets.begin(), triplets.end());
  b.matrix.makeCompressed();
  return b;
}

SparseOperator precision(const SparseOperator& b, int order) {
  if (order != 1 && order != 2)
    throw DomainError("SAR order must be 1 or 2");
  SparseOperator q;
  if (order == 1) {
    q.matrix = SparseRowMatrix(b.matrix.transpose() * b.matrix);
  } else {
    const SparseRowMatrix bb = b.matrix * b.matrix;
    q.matrix = SparseRowMatrix(bb.transpose() * bb);
  }
  q.matrix.makeCompressed();
  return q;
}

Eigen::VectorXd apply_power(const SparseOperator& b, int order, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = x;
  for (int k = 0; k < order; ++k)
    y = b.matrix * y;
  return y;
}

bool strictly_diagonally_dominant(const SparseOperator& b) {
  for (Eigen::Index r = 0; r < b.matrix.outerSize(); ++r) {
    double diag = 0.0, off = 0.0;
    for (SparseRowMatrix::InnerIterator it(b.matrix, r); it; ++it) {
      if (it.col() == r)
        diag = std::fabs(it.value());
      else
        off += std::fabs(it.value());
    }
    if (!(off < diag))
      return false;
  }
  return true;
}

namespace {

bool same_pattern(const SparseOperator& a, const SparseOperator& b) {
  if (a.matrix.rows() != b.matrix.rows() || a.matrix.nonZeros() != b.matrix.nonZeros())
    return false;
  const auto n = a.matrix.rows();
  return std::equal(a.matrix.outerIndexPtr(), a.matrix.outerIndexPtr() + n + 1, b.matrix.outerIndexPtr()) &&
         std::equal(a.matrix.innerIndexPtr(), a.matrix.innerIndexPtr() + a.matrix.nonZeros(),
                    b.matrix.innerIndexPtr());
}

} // namespace

CenterCorrelation::CenterCorrelation(int n, int order, const AssemblyOptions& options)
    : n_(n), order_(order), options_(options) {
  if (n < 1 || n % 2 == 0)
    throw DomainError("centre-correlation lattice size must be odd and positive");
  if (order != 1 && order != 2)
    throw DomainError("SAR order must be 1 or 2");
  grid_ = Grid{n, n, 1.0, 1.0, 0};
}

Eigen::VectorXd CenterCorrelation::operator()(const SarSpec& spec) {
  const std::vector<SarSpec> specs(grid_.total_size(), spec);
  const SparseOperator b = assemble_B(grid_, specs, options_);
  const SparseOperator q = precision(b, order_);
  // Keep the symbolic analysis only while the pattern is unchanged.
  if (!factor_ || !pattern_ || !same_pattern(*pattern_, q)) {
    factor_ = std::make_unique<CholeskyFactor>(q);
    pattern_ = std::make_unique<SparseOperator>(q);
  } else {
    factor_->refactor(q);
  }
  const auto c = Eigen::Index(grid_.index(n_ / 2, n_ / 2));
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(q.dimension());
  unit(c) = 1.0;
  const Eigen::VectorXd col = factor_->solve(unit);
  const Eigen::VectorXd var = factor_->inverse_diagonal();
  Eigen::VectorXd corr(col.size());
  const double sc = std::sqrt(var(c));
  for (Eigen::Index k = 0; k < col.size(); ++k)
    corr(k) = col(k) / (std::sqrt(var(k)) * sc);
  corr(c) = 1.0;
  return corr;
}

Eigen::VectorXd correlation_from_center(const SarSpec& spec, int n, int order, const AssemblyOptions& options) {
  CenterCorrelation eval(n, order, options);
  return eval(spec);
}

Eigen::VectorXd solve_power(const SparseOperator& b, int order, const CholeskyFactor& q_factor,
                            const Eigen::VectorXd& e) {
  if (e.size() != b.dimension() || q_factor.dimension() != b.dimension())
    throw ShapeError("solve_power: dimension mismatch");
  auto normal_solve = [&](Eigen::VectorXd rhs) {
    for (int k = 0; k < order; ++k)
      rhs = b.matrix.transpose() * rhs;
    return q_factor.solve(rhs);
  };
  Eigen::VectorXd y = normal_solve(e);
  y += normal_solve(e - apply_power(b, order, y));
  return y;
}

std::vector<Eigen::VectorXd> simulate(const SparseOperator& b, int order, int draws, std::uint64_t seed,
                                      int workers) {
  if (draws < 0)
    throw DomainError("number of draws must be non-negative");
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(draws));
  if (draws == 0)
    return out;
  const SparseOperator q = precision(b, order);
  const CholeskyFactor factor(q);
  const auto n = b.dimension();
  parallel_for(std::size_t(draws), workers, [&](std::size_t d) {
    NormalStream normal(seed, d);
    Eigen::VectorXd e(n);
    for (Eigen::Index k = 0; k < n; ++k)
      e(k) = normal();
    out[d] = solve_power(b, order, factor, e);
  });
  return out;
}

} // namespace nonstat
