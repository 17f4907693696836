#include "lambda_lab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lambda_lab/error.hpp"

namespace lambda_lab {

template <FieldKind K>
Field<K>::Field(const PeriodicGrid& grid, std::vector<double> data)
    : grid_(grid), data_(std::move(data)) {
  if (data_.size() != grid_.node_count() * components(grid_.dim()))
    throw InvalidArgument("field: value count " + std::to_string(data_.size()) +
                          " does not match grid");
}

template <FieldKind K>
Eigen::MatrixXd Field<K>::matrix(std::size_t node) const requires(K == FieldKind::sym_tensor) {
  const int n = dim();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = at(i, j, node);
  return m;
}

template <FieldKind K>
Field<K>& Field<K>::operator+=(const Field& o) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

template <FieldKind K>
Field<K>& Field<K>::operator-=(const Field& o) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

template <FieldKind K>
Field<K>& Field<K>::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

template <FieldKind K>
Field<K>& Field<K>::axpy(double a, const Field& x) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  return *this;
}

template <FieldKind K>
double Field<K>::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

template class Field<FieldKind::scalar>;
template class Field<FieldKind::covector>;
template class Field<FieldKind::sym_tensor>;

SymTensorField constant_tensor(const PeriodicGrid& grid, const Eigen::MatrixXd& m) {
  SymTensorField h(grid);
  const int n = grid.dim();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      auto c = h.component(sym_index(n, i, j));
      std::fill(c.begin(), c.end(), 0.5 * (m(i, j) + m(j, i)));
    }
  return h;
}

SymTensorField scalar_times(const ScalarField& u, const Eigen::MatrixXd& m) {
  SymTensorField h(u.grid());
  const int n = u.dim();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double mij = 0.5 * (m(i, j) + m(j, i));
      auto c = h.component(sym_index(n, i, j));
      for (std::size_t k = 0; k < u.nodes(); ++k) c[k] = u[k] * mij;
    }
  return h;
}

// ==== MetricField ====

MetricField::MetricField(SymTensorField g)
    : g_(std::move(g)), ginv_(g_.grid()), sqrt_det_(g_.grid()) {
  const int n = g_.dim();
  for (std::size_t k = 0; k < g_.nodes(); ++k) {
    const Eigen::MatrixXd m = g_.matrix(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    if (!(lo > kPositivityTolerance))
      throw InvalidArgument("metric: not positive definite at node " + std::to_string(k) +
                            " (smallest eigenvalue " + std::to_string(lo) + ")");
    const Eigen::MatrixXd inv = m.inverse();
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) ginv_.at(i, j, k) = 0.5 * (inv(i, j) + inv(j, i));
    sqrt_det_[k] = std::sqrt(m.determinant());
  }
}

MetricField MetricField::flat(const PeriodicGrid& grid) {
  return MetricField(constant_tensor(grid, Eigen::MatrixXd::Identity(grid.dim(), grid.dim())));
}

MetricField MetricField::constant(const PeriodicGrid& grid, const Eigen::MatrixXd& m) {
  return MetricField(constant_tensor(grid, m));
}

MetricField MetricField::conformal(const ScalarField& u) {
  ScalarField e(u.grid());
  for (std::size_t k = 0; k < u.nodes(); ++k) e[k] = std::exp(2.0 * u[k]);
  return MetricField(scalar_times(e, Eigen::MatrixXd::Identity(u.dim(), u.dim())));
}

std::vector<double> MetricField::weights() const {
  const double cv = grid().cell_volume();
  std::vector<double> w(sqrt_det_.nodes());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = sqrt_det_[k] * cv;
  return w;
}

double MetricField::volume() const {
  double v = 0.0;
  for (double w : weights()) v += w;
  return v;
}

double MetricField::max_inverse_eigenvalue() const {
  double hi = 0.0;
  for (std::size_t k = 0; k < ginv_.nodes(); ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ginv_.matrix(k), Eigen::EigenvaluesOnly);
    hi = std::max(hi, es.eigenvalues()(dim() - 1));
  }
  return hi;
}

double MetricField::min_eigenvalue() const {
  double lo = INFINITY;
  for (std::size_t k = 0; k < g_.nodes(); ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g_.matrix(k), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
  }
  return lo;
}

Eigen::MatrixXd MetricField::mean_matrix() const {
  const int n = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < g_.nodes(); ++k) m += g_.matrix(k);
  return m / static_cast<double>(g_.nodes());
}

}  // namespace lambda_lab
