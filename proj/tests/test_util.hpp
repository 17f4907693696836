#pragma once

#include <cmath>
#include <random>

#include "lambda_lab/fields.hpp"

namespace test_util {

using namespace lambda_lab;

/// Smooth random scalar built from Fourier modes |m_i| <= kmax.
inline ScalarField smooth_scalar(const PeriodicGrid& grid, std::mt19937_64& rng, double amp,
                                 int kmax = 2) {
  std::normal_distribution<double> nd(0.0, 1.0);
  ScalarField u(grid);
  const int n = grid.dim();
  const int k3 = n == 3 ? kmax : 0;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b)
      for (int c = -k3; c <= k3; ++c) {
        const double ca = nd(rng) * amp / (1.0 + a * a + b * b + c * c);
        const double sa = nd(rng) * amp / (1.0 + a * a + b * b + c * c);
        for (std::size_t k = 0; k < grid.node_count(); ++k) {
          double ph = 2.0 * M_PI * (a * grid.coordinate(k, 0) / grid.period(0) +
                                    b * grid.coordinate(k, 1) / grid.period(1));
          if (n == 3) ph += 2.0 * M_PI * c * grid.coordinate(k, 2) / grid.period(2);
          u[k] += ca * std::cos(ph) + sa * std::sin(ph);
        }
      }
  return u;
}

inline SymTensorField smooth_tensor(const PeriodicGrid& grid, std::mt19937_64& rng, double amp,
                                    int kmax = 2) {
  SymTensorField h(grid);
  for (int s = 0; s < h.component_count(); ++s) {
    const ScalarField u = smooth_scalar(grid, rng, amp, kmax);
    std::copy(u.data().begin(), u.data().end(), h.component(s).begin());
  }
  return h;
}

inline VectorField smooth_vector(const PeriodicGrid& grid, std::mt19937_64& rng, double amp,
                                 int kmax = 2) {
  VectorField X(grid);
  for (int s = 0; s < X.component_count(); ++s) {
    const ScalarField u = smooth_scalar(grid, rng, amp, kmax);
    std::copy(u.data().begin(), u.data().end(), X.component(s).begin());
  }
  return X;
}

/// delta + a smooth perturbation of the given amplitude.
inline MetricField smooth_metric(const PeriodicGrid& grid, std::mt19937_64& rng, double amp,
                                 int kmax = 2) {
  SymTensorField g = smooth_tensor(grid, rng, amp, kmax);
  for (int i = 0; i < grid.dim(); ++i)
    for (std::size_t k = 0; k < grid.node_count(); ++k) g.at(i, i, k) += 1.0;
  return MetricField(g);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class F>
double max_abs_diff(const F& a, const F& b) {
  return max_abs_diff(std::span<const double>(a.data()), std::span<const double>(b.data()));
}

}  // namespace test_util
