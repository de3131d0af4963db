#pragma once

// Spatial autoregression on a rectangular lattice.
//
// Each node contributes one row of B, filled with the 3x3 stencil of the
// discretized operator kappa^2 - div(H grad). The field solves B y = e (order
// 1) or B B y = e (order 2), giving the precision Q = B^T B or (BB)^T (BB).

#include "nonstat/fields.hpp"
#include "nonstat/sparse.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <cstdint>
#include <span>
#include <vector>

namespace nonstat {

struct SarSpec {
  double kappa2 = 1.0;
  double h11 = 1.0;
  double h12 = 0.0;
  double h22 = 1.0;

  static SarSpec isotropic(double kappa2) { return {kappa2, 1.0, 0.0, 1.0}; }
  /// H = U diag(l1, l2) U^T with U the rotation by theta.
  static SarSpec from_eigen(double kappa2, double l1, double l2, double theta);

  /// kappa2 > 0 and H symmetric positive definite; DomainError otherwise.
  void validate() const;
};

/// Mixed-derivative weights on the four corners.
///  - Centered: central difference of 2 H12 d2/ds1ds2, corners +-H12/(2 h1 h2).
///  - AsPrinted: corners +-2 H12/(h1 h2), the magnitude in the published
///    stencil. The resulting operator is indefinite once
///    |H12| > sqrt(H11 H22)/4, so it is kept for comparison only.
enum class CrossTerm { Centered, AsPrinted };

/// Weights of one B row, indexed by offsets (ds1, ds2) in {-1, 0, 1}^2.
/// "Top" means +s2 and "left" means -s1: the top-left and bottom-right
/// corners carry +c, the other two -c.
struct Stencil3x3 {
  std::array<double, 9> w{};

  double& at(int ds1, int ds2) { return w[std::size_t((ds2 + 1) * 3 + (ds1 + 1))]; }
  double at(int ds1, int ds2) const { return w[std::size_t((ds2 + 1) * 3 + (ds1 + 1))]; }
  double center() const { return at(0, 0); }
  double sum() const;
};

Stencil3x3 build_stencil(const SarSpec& spec, double h1, double h2, CrossTerm cross = CrossTerm::Centered);

/// How rows of nodes on the outer frame of the (buffered) lattice are filled.
///  - Clip: neighbours outside the lattice are dropped and the centre is set
///    so the row sums to kappa^2.
///  - Truncate: neighbours outside are dropped, centre unchanged; needs a
///    buffer of at least one node.
enum class Boundary { Clip, Truncate };

struct AssemblyOptions {
  Boundary boundary = Boundary::Clip;
  CrossTerm cross = CrossTerm::Centered;
};

/// Assemble B over every node of the buffered grid. `specs` has one entry per
/// buffered node (Grid::total_size()) in buffered row-major order. Stencils
/// use the grid spacings h1, h2.
SparseOperator assemble_B(const Grid& grid, std::span<const SarSpec> specs, const AssemblyOptions& options = {});

/// Q = B^T B (order 1) or (BB)^T (BB) (order 2).
SparseOperator precision(const SparseOperator& b, int order);

/// B^order applied to x.
Eigen::VectorXd apply_power(const SparseOperator& b, int order, const Eigen::VectorXd& x);

/// Row sums of |off-diagonal| < |diagonal| for every row.
bool strictly_diagonally_dominant(const SparseOperator& b);

/// Correlations between the centre node of an N x N lattice (unit spacing,
/// no buffer) and every node, for a stationary SAR with the given spec.
/// Length N^2, row-major, centre entry exactly 1.
Eigen::VectorXd correlation_from_center(const SarSpec& spec, int n, int order,
                                        const AssemblyOptions& options = {});

/// Reusable evaluator for correlation_from_center: the lattice pattern and
/// its symbolic factorization are kept between calls with different specs.
class CenterCorrelation {
public:
  CenterCorrelation(int n, int order, const AssemblyOptions& options = {});
  Eigen::VectorXd operator()(const SarSpec& spec);
  int size() const { return n_; }

private:
  int n_;
  int order_;
  AssemblyOptions options_;
  Grid grid_;
  std::unique_ptr<CholeskyFactor> factor_;
  std::unique_ptr<SparseOperator> pattern_;
};

/// Solves B^order y = e through the factor of Q = (B^order)^T B^order, with one
/// step of iterative refinement on the residual e - B^order y.
Eigen::VectorXd solve_power(const SparseOperator& b, int order, const CholeskyFactor& q_factor,
                            const Eigen::VectorXd& e);

/// Draws y with B^order y = e, e standard normal. Draw d uses the random
/// stream keyed by (seed, d); the result is independent of `workers`.
std::vector<Eigen::VectorXd> simulate(const SparseOperator& b, int order, int draws, std::uint64_t seed,
                                      int workers = 1);

} // namespace nonstat
