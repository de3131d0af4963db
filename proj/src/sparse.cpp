#include "nonstat/sparse.hpp"

#include "nonstat/errors.hpp"
#include "nonstat/field_io.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace nonstat {

bool SparseOperator::structurally_valid() const {
  if (!matrix.isCompressed() || matrix.rows() != matrix.cols())
    return false;
  const int* outer = matrix.outerIndexPtr();
  const int* inner = matrix.innerIndexPtr();
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (int p = outer[r]; p < outer[r + 1]; ++p) {
      if (inner[p] < 0 || inner[p] >= matrix.cols())
        return false;
      if (p > outer[r] && inner[p] <= inner[p - 1])
        return false;
    }
  }
  return true;
}

std::size_t SparseOperator::max_row_nonzeros() const {
  std::size_t best = 0;
  for (Eigen::Index r = 0; r < matrix.rows(); ++r)
    best = std::max<std::size_t>(best, std::size_t(matrix.outerIndexPtr()[r + 1] - matrix.outerIndexPtr()[r]));
  return best;
}

CholeskyFactor::CholeskyFactor(const SparseOperator& q) {
  n_ = q.dimension();
  ldlt_ = std::make_unique<Eigen::SimplicialLDLT<SparseColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>>();
  lower_ = SparseColMatrix(q.matrix.triangularView<Eigen::Lower>());
  ldlt_->analyzePattern(lower_);
  factor(q);
}

void CholeskyFactor::refactor(const SparseOperator& q) {
  if (q.dimension() != n_)
    throw ShapeError("refactor: dimension changed");
  lower_ = SparseColMatrix(q.matrix.triangularView<Eigen::Lower>());
  factor(q);
}

void CholeskyFactor::factor(const SparseOperator&) {
  ldlt_->factorize(lower_);
  const auto& d = ldlt_->vectorD();
  const auto& pinv = ldlt_->permutationPinv().indices();
  // On a zero pivot Eigen stops early; entries past it are unset, but the
  // scan below reaches the zero first.
  for (Eigen::Index k = 0; k < n_; ++k) {
    const double dk = d(k);
    if (!(dk > 0.0) || !std::isfinite(dk)) {
      const auto original = std::ptrdiff_t(pinv(k));
      throw FactorizationError("matrix is not positive definite: pivot " + std::to_string(dk) +
                                   " at node " + std::to_string(original),
                               original);
    }
  }
  if (ldlt_->info() != Eigen::Success)
    throw FactorizationError("sparse factorization failed", -1);
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_)
    throw ShapeError("solve: right-hand side has wrong length");
  return ldlt_->solve(rhs);
}

double CholeskyFactor::log_determinant() const { return ldlt_->vectorD().array().log().sum(); }

double CholeskyFactor::min_pivot() const { return ldlt_->vectorD().minCoeff(); }

Eigen::VectorXd CholeskyFactor::inverse_diagonal() const {
  // Q_perm = L D L^T with unit lower L (strictly-lower part stored,
  // column-major, rows sorted). Sigma = Q_perm^-1 is computed on the pattern
  // of L, columns from last to first:
  //   Sigma_ij = -sum_{k in pat(i)} L_ki Sigma_kj           (j in pat(i))
  //   Sigma_ii = 1/D_i - sum_{k in pat(i)} L_ki Sigma_ki
  // The pattern of L is closed under these recursions, so every Sigma_kj
  // needed is already stored in column min(k, j).
  const SparseColMatrix& l = ldlt_->matrixL().nestedExpression();
  const auto& d = ldlt_->vectorD();
  const int n = int(n_);
  const int* lp = l.outerIndexPtr();
  const int* li = l.innerIndexPtr();
  const double* lx = l.valuePtr();
  const int* nnz = l.innerNonZeroPtr();
  auto col_end = [&](int c) { return nnz ? lp[c] + nnz[c] : lp[c + 1]; };

  std::vector<double> sigma_off(std::size_t(lp[n]), 0.0);
  std::vector<double> sigma_diag(std::size_t(n), 0.0);
  std::vector<int> mark(std::size_t(n), -1);
  std::vector<double> lval(std::size_t(n), 0.0);
  std::vector<double> acc(std::size_t(n), 0.0);

  for (int i = n - 1; i >= 0; --i) {
    const int begin = lp[i], end = col_end(i);
    for (int p = begin; p < end; ++p) {
      mark[li[p]] = i;
      lval[li[p]] = lx[p];
      acc[li[p]] = 0.0;
    }
    for (int p = begin; p < end; ++p) {
      const int k = li[p];
      const double lki = lx[p];
      acc[k] += lki * sigma_diag[k];
      for (int q = lp[k]; q < col_end(k); ++q) {
        const int r = li[q];
        if (mark[r] != i)
          continue;
        const double s = sigma_off[q];
        acc[k] += lval[r] * s;
        acc[r] += lki * s;
      }
    }
    double diag = 1.0 / d(i);
    for (int p = begin; p < end; ++p) {
      const int j = li[p];
      const double sij = -acc[j];
      sigma_off[p] = sij;
      diag -= lx[p] * sij;
    }
    sigma_diag[i] = diag;
  }

  // Undo the fill-reducing permutation: original node m sits at perm[m].
  const auto& perm = ldlt_->permutationP().indices();
  Eigen::VectorXd out(n_);
  for (int m = 0; m < n; ++m)
    out(m) = sigma_diag[std::size_t(perm(m))];
  return out;
}

Eigen::VectorXd marginal_variances(const SparseOperator& q) { return CholeskyFactor(q).inverse_diagonal(); }

void write_matrix_market(const SparseOperator& op, const std::filesystem::path& path) {
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  out += std::to_string(op.matrix.rows()) + " " + std::to_string(op.matrix.cols()) + " " +
         std::to_string(op.matrix.nonZeros()) + "\n";
  for (Eigen::Index r = 0; r < op.matrix.outerSize(); ++r)
    for (SparseRowMatrix::InnerIterator it(op.matrix, r); it; ++it)
      out += std::to_string(it.row() + 1) + " " + std::to_string(it.col() + 1) + " " +
             format_double(it.value()) + "\n";
  write_file_bytes(path, out);
}

} // namespace nonstat
