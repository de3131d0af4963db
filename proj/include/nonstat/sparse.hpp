#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cstddef>
#include <filesystem>
#include <memory>

namespace nonstat {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Square sparse matrix in compressed-row layout (B or Q).
struct SparseOperator {
  SparseRowMatrix matrix;

  Eigen::Index dimension() const { return matrix.rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return matrix * x; }
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const { return matrix.transpose() * x; }
  /// Sorted, in-bounds, compressed CSR.
  bool structurally_valid() const;
  std::size_t max_row_nonzeros() const;
};

/// Sparse LDL^T factorization of a symmetric positive definite matrix with
/// fill-reducing (AMD) ordering.
///
/// The factor is immutable once built and may be shared between threads for
/// concurrent solves. `refactor` reuses the symbolic analysis when the
/// sparsity pattern is unchanged.
class CholeskyFactor {
public:
  /// Throws FactorizationError naming the first non-positive pivot (as an
  /// index of the original ordering) when the matrix is not positive definite.
  explicit CholeskyFactor(const SparseOperator& q);

  /// Numeric refactorization over the same sparsity pattern.
  void refactor(const SparseOperator& q);

  Eigen::Index dimension() const { return n_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  double log_determinant() const;
  /// diag(Q^-1) by Takahashi recursions on the factor's sparsity pattern.
  Eigen::VectorXd inverse_diagonal() const;
  /// Smallest pivot of D (all positive after a successful factorization).
  double min_pivot() const;

private:
  void factor(const SparseOperator& q);

  Eigen::Index n_ = 0;
  SparseColMatrix lower_;
  std::unique_ptr<Eigen::SimplicialLDLT<SparseColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>> ldlt_;
};

/// Convenience wrapper: factorize and return diag(Q^-1).
Eigen::VectorXd marginal_variances(const SparseOperator& q);

/// MatrixMarket coordinate dump for external inspection.
void write_matrix_market(const SparseOperator& op, const std::filesystem::path& path);

} // namespace nonstat
