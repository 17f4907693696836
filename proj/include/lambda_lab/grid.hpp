#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <vector>

namespace lambda_lab {

/// The flat torus T^n = R^n / (L_1 Z x ... x L_n Z) sampled on a uniform
/// node lattice. Nodes are stored row-major with the last axis fastest.
///
/// Resolutions must be odd and at least 9: the Fourier derivative on an even
/// lattice annihilates the Nyquist mode, which would give the Laplacian a
/// spurious null space and make the ground state of -4Δ + R degenerate.
class PeriodicGrid {
 public:
  static constexpr int kMinResolution = 9;

  PeriodicGrid(std::vector<int> resolution, std::vector<double> periods);

  /// n-dimensional torus [0, period)^n with `res` nodes per axis.
  static PeriodicGrid cube(int dim, int res, double period = 2.0 * std::numbers::pi);

  int dim() const noexcept { return dim_; }
  int res(int axis) const { return res_[axis]; }
  double period(int axis) const { return period_[axis]; }
  double spacing(int axis) const { return period_[axis] / res_[axis]; }
  double min_spacing() const noexcept;

  std::size_t node_count() const noexcept { return nodes_; }
  double cell_volume() const noexcept;
  double volume() const noexcept;

  std::array<int, 3> index(std::size_t node) const noexcept;
  std::size_t node(const std::array<int, 3>& idx) const noexcept;
  double coordinate(std::size_t node, int axis) const noexcept;

  /// Node obtained by translating `node` by `shift` lattice steps (periodic).
  std::size_t shifted(std::size_t node, const std::array<int, 3>& shift) const noexcept;

  bool operator==(const PeriodicGrid& other) const noexcept;

 private:
  int dim_ = 0;
  std::array<int, 3> res_{1, 1, 1};
  std::array<double, 3> period_{1.0, 1.0, 1.0};
  std::size_t nodes_ = 0;
};

}  // namespace lambda_lab
