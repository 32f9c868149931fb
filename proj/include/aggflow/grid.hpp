#pragma once

#include <Eigen/Core>

#include <array>
#include <memory>
#include <stdexcept>

namespace aggflow {

using Index = Eigen::Index;

namespace detail {
struct GridTables;
}

/// Uniform periodic grid on the box [-1/2, 1/2)^dim.
///
/// Nodes sit at x_j = -1/2 + j/n on every axis and the wavenumber lattice
/// covers [-n/2, n/2) per axis. Storage is row-major with axis 0 slowest.
/// Lookup tables (node coordinates, wavenumbers, |k|, dealias mask) are
/// shared between copies, so a Grid is cheap to pass by value.
class Grid {
 public:
  Grid(int dim, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  Index size() const { return size_; }
  double spacing() const { return 1.0 / n_; }

  /// Node coordinate along one axis for a per-axis index.
  double node(int j) const { return -0.5 + static_cast<double>(j) / n_; }
  /// Signed wavenumber for a per-axis FFT index.
  int wavenumber(int j) const { return j < n_ / 2 ? j : j - n_; }
  /// Per-axis FFT index for a signed wavenumber in [-n/2, n/2).
  int wavenumber_index(int k) const { return k >= 0 ? k : k + n_; }

  std::array<int, 3> unravel(Index i) const;
  Index ravel(const std::array<int, 3>& idx) const;
  /// Linear index of the lattice point k (components beyond dim ignored).
  Index mode_index(const std::array<int, 3>& k) const;

  /// Coordinate of every node along `axis`, in storage order.
  const Eigen::ArrayXd& coordinate(int axis) const;
  /// Wavenumber component k_axis for every lattice point, in storage order.
  const Eigen::ArrayXd& wavevector(int axis) const;
  /// Euclidean |k| per lattice point.
  const Eigen::ArrayXd& wavenumber_norm() const;
  /// Euclidean |x| per node (distance to the origin node).
  const Eigen::ArrayXd& radius() const;
  /// (-1)^{k_1+...+k_d}: the phase from the node offset x_0 = -1/2.
  const Eigen::ArrayXd& node_phase() const;
  /// 1 where every |k_j| < n/3, else 0.
  const Eigen::ArrayXd& dealias_mask() const;
  /// 1 except on lattice points with some k_j = -n/2 (no real partner).
  const Eigen::ArrayXd& nyquist_mask() const;
  /// Storage index of -k (mod n) for every lattice point.
  const Eigen::Array<Index, Eigen::Dynamic, 1>& negated_index() const;

  bool operator==(const Grid& other) const { return dim_ == other.dim_ && n_ == other.n_; }
  bool operator!=(const Grid& other) const { return !(*this == other); }

 private:
  int dim_;
  int n_;
  Index size_;
  std::shared_ptr<const detail::GridTables> tables_;
};

/// Validating factory: dim in {1,2,3}, n even and >= 8.
Grid make_grid(int dim, int n);

/// Thrown when two operands live on different grids.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace aggflow
