#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lambda_lab/grid.hpp"

namespace lambda_lab {

/// Storage slot of the symmetric pair (i, j) in upper-triangular row order:
/// 2D: 00 01 11, 3D: 00 01 02 11 12 22.
constexpr int sym_index(int n, int i, int j) noexcept {
  if (i > j) { int t = i; i = j; j = t; }
  return i * n - i * (i - 1) / 2 + (j - i);
}

constexpr int sym_count(int n) noexcept { return n * (n + 1) / 2; }

enum class FieldKind { scalar, covector, sym_tensor };

/// Tensor-valued function on the nodes of a PeriodicGrid. Components are
/// stored one after another (component-major), each a contiguous plane of
/// node values. Covectors carry lower indices; symmetric tensors store only
/// the upper triangle so h_ij = h_ji holds by construction.
template <FieldKind K>
class Field {
 public:
  static constexpr FieldKind kind = K;

  static constexpr int components(int dim) noexcept {
    if constexpr (K == FieldKind::scalar) return 1;
    else if constexpr (K == FieldKind::covector) return dim;
    else return sym_count(dim);
  }

  explicit Field(const PeriodicGrid& grid)
      : grid_(grid), data_(grid.node_count() * components(grid.dim()), 0.0) {}

  Field(const PeriodicGrid& grid, std::vector<double> data);

  const PeriodicGrid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return grid_.dim(); }
  int component_count() const noexcept { return components(grid_.dim()); }
  std::size_t nodes() const noexcept { return grid_.node_count(); }

  std::span<double> component(int c) noexcept {
    return {data_.data() + c * nodes(), nodes()};
  }
  std::span<const double> component(int c) const noexcept {
    return {data_.data() + c * nodes(), nodes()};
  }

  double& operator()(int c, std::size_t node) noexcept { return data_[c * nodes() + node]; }
  double operator()(int c, std::size_t node) const noexcept { return data_[c * nodes() + node]; }

  /// Scalar node access.
  double& operator[](std::size_t node) noexcept requires(K == FieldKind::scalar) {
    return data_[node];
  }
  double operator[](std::size_t node) const noexcept requires(K == FieldKind::scalar) {
    return data_[node];
  }

  /// Symmetric component h_ij at a node.
  double& at(int i, int j, std::size_t node) noexcept requires(K == FieldKind::sym_tensor) {
    return data_[sym_index(dim(), i, j) * nodes() + node];
  }
  double at(int i, int j, std::size_t node) const noexcept requires(K == FieldKind::sym_tensor) {
    return data_[sym_index(dim(), i, j) * nodes() + node];
  }

  /// The n x n matrix of a symmetric tensor at a node.
  Eigen::MatrixXd matrix(std::size_t node) const requires(K == FieldKind::sym_tensor);

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s);
  /// this += a * x
  Field& axpy(double a, const Field& x);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

  /// Largest absolute node value over all components.
  double max_abs() const noexcept;

 private:
  PeriodicGrid grid_;
  std::vector<double> data_;
};

using ScalarField = Field<FieldKind::scalar>;
using VectorField = Field<FieldKind::covector>;
using SymTensorField = Field<FieldKind::sym_tensor>;

extern template class Field<FieldKind::scalar>;
extern template class Field<FieldKind::covector>;
extern template class Field<FieldKind::sym_tensor>;

/// Fill a scalar field from a function of the node coordinates.
template <class F>
ScalarField sample(const PeriodicGrid& grid, F&& fn) {
  ScalarField u(grid);
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < grid.dim(); ++a) x[a] = grid.coordinate(k, a);
    u[k] = fn(x);
  }
  return u;
}

/// Symmetric tensor with the same constant matrix at every node.
SymTensorField constant_tensor(const PeriodicGrid& grid, const Eigen::MatrixXd& m);

/// The tensor u * m with m a constant matrix.
SymTensorField scalar_times(const ScalarField& u, const Eigen::MatrixXd& m);

// ==== Riemannian metric ====

/// A symmetric tensor field that is positive definite at every node, with the
/// inverse metric and the density sqrt(det g) cached.
class MetricField {
 public:
  static constexpr double kPositivityTolerance = 1e-12;

  /// Throws InvalidArgument if g fails to be positive definite at some node.
  explicit MetricField(SymTensorField g);

  static MetricField flat(const PeriodicGrid& grid);
  static MetricField constant(const PeriodicGrid& grid, const Eigen::MatrixXd& m);
  /// e^{2u} times the Euclidean metric.
  static MetricField conformal(const ScalarField& u);

  const PeriodicGrid& grid() const noexcept { return g_.grid(); }
  int dim() const noexcept { return g_.dim(); }
  const SymTensorField& g() const noexcept { return g_; }
  const SymTensorField& ginv() const noexcept { return ginv_; }
  const ScalarField& sqrt_det() const noexcept { return sqrt_det_; }

  double g_at(int i, int j, std::size_t k) const noexcept { return g_.at(i, j, k); }
  double ginv_at(int i, int j, std::size_t k) const noexcept { return ginv_.at(i, j, k); }

  /// Quadrature weight of each node: sqrt(det g) times the coordinate cell volume.
  std::vector<double> weights() const;
  double volume() const;
  /// Largest eigenvalue of g^{-1} over all nodes.
  double max_inverse_eigenvalue() const;
  /// Smallest eigenvalue of g over all nodes.
  double min_eigenvalue() const;
  /// Node average of the metric coefficients (a constant metric).
  Eigen::MatrixXd mean_matrix() const;

 private:
  SymTensorField g_;
  SymTensorField ginv_;
  ScalarField sqrt_det_;
};

}  // namespace lambda_lab
