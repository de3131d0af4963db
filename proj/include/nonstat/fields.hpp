#pragma once

// Lattice geometry and the containers shared by every stage of the pipeline.
//
// Node ordering is row-major with the column index j (axis s1) fastest.
// Row i runs along axis s2. Fields store interior values only; buffered
// vectors of size `Grid::total_size()` appear only inside the SAR code.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace nonstat {

/// Matérn smoothness. Only the orders exercised by the model are supported;
/// `Half` is the exponential kernel and serves as an analytic test case.
enum class Smoothness { Half, One, Two };

double smoothness_value(Smoothness nu);
/// Maps 0.5, 1, 2 onto the enum; anything else is a DomainError.
Smoothness smoothness_from(double nu);
/// SAR order matching the smoothness (1 for nu=1, 2 for nu=2).
int sar_order(Smoothness nu);

struct Grid {
  int nx = 1;
  int ny = 1;
  double h1 = 1.0;
  double h2 = 1.0;
  int buffer = 0;

  /// Throws DomainError unless nx, ny >= 1, h1, h2 > 0 and buffer >= 0.
  void validate() const;

  int total_nx() const { return nx + 2 * buffer; }
  int total_ny() const { return ny + 2 * buffer; }
  std::size_t interior_size() const { return std::size_t(nx) * std::size_t(ny); }
  std::size_t total_size() const {
    return std::size_t(total_nx()) * std::size_t(total_ny());
  }

  /// Interior linear index of row i, column j.
  std::size_t index(int i, int j) const { return std::size_t(i) * nx + std::size_t(j); }
  std::pair<int, int> coords(std::size_t k) const {
    return {int(k / std::size_t(nx)), int(k % std::size_t(nx))};
  }

  /// Linear index on the buffered lattice; (i, j) are buffered coordinates.
  std::size_t buffered_index(int i, int j) const {
    return std::size_t(i) * total_nx() + std::size_t(j);
  }
  /// Buffered index of interior node (i, j).
  std::size_t interior_to_buffered(int i, int j) const {
    return buffered_index(i + buffer, j + buffer);
  }

  Grid with_buffer(int b) const {
    Grid g = *this;
    g.buffer = b;
    return g;
  }
  /// Same lattice with the buffer stripped (user-facing geometry).
  Grid interior() const { return with_buffer(0); }

  bool operator==(const Grid&) const = default;
};

struct Field {
  Grid grid;
  std::vector<double> values;

  /// Length and finiteness check.
  void validate() const;
};

struct FieldEnsemble {
  Grid grid;
  std::vector<std::vector<double>> replicates;

  std::size_t size() const { return replicates.size(); }
  Field replicate(std::size_t r) const { return Field{grid, replicates.at(r)}; }
  void validate() const;
};

/// Anisotropic Matérn parameters at one location. Ranges are in the same
/// units as the grid coordinates (j*h1, i*h2).
struct LocalParams {
  double xi1 = 1.0;
  double xi2 = 1.0;
  double theta = 0.0;
  double sigma2 = 1.0;
  double tau2 = 0.0;
  Smoothness nu = Smoothness::One;

  void validate() const;
  /// Geometric-mean range sqrt(xi1 * xi2).
  double mean_range() const;
};

/// Puts (xi1, xi2, theta) into canonical form: xi1 >= xi2, theta in [0, pi).
LocalParams canonicalize(LocalParams p);

struct ParamFields {
  Grid grid;
  Smoothness nu = Smoothness::One;
  std::vector<LocalParams> params;
  std::vector<std::uint8_t> converged;
  /// 1 where a window was centred on the node, 0 where the value was filled
  /// in from the nearest window centre.
  std::vector<std::uint8_t> estimated;

  void validate() const;
};

struct Standardized {
  FieldEnsemble ensemble;
  Field mean;
  Field sd;
};

/// Removes the per-node ensemble mean and divides by the unbiased per-node
/// standard deviation. Requires p >= 2; zero deviation raises DegenerateError.
Standardized standardize(const FieldEnsemble& ensemble);

} // namespace nonstat
