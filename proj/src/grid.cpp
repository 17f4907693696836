#include "lambda_lab/grid.hpp"

#include <algorithm>
#include <string>

#include "lambda_lab/error.hpp"

namespace lambda_lab {

PeriodicGrid::PeriodicGrid(std::vector<int> resolution, std::vector<double> periods) {
  if (resolution.size() != periods.size())
    throw InvalidArgument("grid: resolution and period lists differ in length");
  dim_ = static_cast<int>(resolution.size());
  if (dim_ != 2 && dim_ != 3)
    throw InvalidArgument("grid: dimension must be 2 or 3, got " + std::to_string(dim_));
  nodes_ = 1;
  for (int a = 0; a < dim_; ++a) {
    if (resolution[a] < kMinResolution)
      throw InvalidArgument("grid: resolution " + std::to_string(resolution[a]) +
                            " below minimum " + std::to_string(kMinResolution));
    if (resolution[a] % 2 == 0)
      throw InvalidArgument("grid: resolution must be odd, got " + std::to_string(resolution[a]));
    if (!(periods[a] > 0.0)) throw InvalidArgument("grid: periods must be positive");
    res_[a] = resolution[a];
    period_[a] = periods[a];
    nodes_ *= static_cast<std::size_t>(resolution[a]);
  }
}

PeriodicGrid PeriodicGrid::cube(int dim, int res, double period) {
  return PeriodicGrid(std::vector<int>(dim, res), std::vector<double>(dim, period));
}

double PeriodicGrid::min_spacing() const noexcept {
  double h = spacing(0);
  for (int a = 1; a < dim_; ++a) h = std::min(h, spacing(a));
  return h;
}

double PeriodicGrid::cell_volume() const noexcept {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= spacing(a);
  return v;
}

double PeriodicGrid::volume() const noexcept {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= period_[a];
  return v;
}

std::array<int, 3> PeriodicGrid::index(std::size_t node) const noexcept {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(node % res_[a]);
    node /= res_[a];
  }
  return idx;
}

std::size_t PeriodicGrid::node(const std::array<int, 3>& idx) const noexcept {
  std::size_t k = 0;
  for (int a = 0; a < dim_; ++a) k = k * res_[a] + static_cast<std::size_t>(idx[a]);
  return k;
}

double PeriodicGrid::coordinate(std::size_t node, int axis) const noexcept {
  return index(node)[axis] * spacing(axis);
}

std::size_t PeriodicGrid::shifted(std::size_t n, const std::array<int, 3>& shift) const noexcept {
  auto idx = index(n);
  for (int a = 0; a < dim_; ++a) idx[a] = ((idx[a] + shift[a]) % res_[a] + res_[a]) % res_[a];
  return node(idx);
}

bool PeriodicGrid::operator==(const PeriodicGrid& other) const noexcept {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a)
    if (res_[a] != other.res_[a] || period_[a] != other.period_[a]) return false;
  return true;
}

}  // namespace lambda_lab
