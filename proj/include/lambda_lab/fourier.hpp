#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "lambda_lab/grid.hpp"

namespace lambda_lab::fourier {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

/// Real-to-complex discrete Fourier transform on a PeriodicGrid, backed by
/// FFTW. Only the non-negative half of the last axis is stored. Plans are
/// shared between all transforms of the same shape; execution is reentrant.
class Transform {
 public:
  explicit Transform(const PeriodicGrid& grid);

  const PeriodicGrid& grid() const noexcept { return grid_; }
  std::size_t modes() const noexcept { return wave_.size(); }

  /// Physical wavevector 2 pi m / L of a stored mode.
  const std::array<double, 3>& wavevector(std::size_t mode) const noexcept { return wave_[mode]; }

  Spectrum forward(std::span<const double> values) const;
  /// Normalized inverse, so inverse(forward(u)) == u up to round-off.
  std::vector<double> inverse(const Spectrum& spec) const;

  /// Apply a real Fourier symbol s(k); the symbol must be even in k.
  template <class Symbol>
  std::vector<double> multiply(std::span<const double> values, Symbol&& symbol) const {
    Spectrum s = forward(values);
    for (std::size_t m = 0; m < s.size(); ++m) s[m] *= symbol(wave_[m]);
    return inverse(s);
  }

  std::vector<double> derivative(std::span<const double> values, int axis) const;
  std::vector<double> second_derivative(std::span<const double> values, int a, int b) const;
  std::vector<std::vector<double>> gradient(std::span<const double> values) const;
  /// sum_i D_i F_i for n planes F_i.
  std::vector<double> divergence(const std::vector<std::vector<double>>& flux) const;

 private:
  PeriodicGrid grid_;
  std::vector<std::array<double, 3>> wave_;
  void* r2c_ = nullptr;
  void* c2r_ = nullptr;
};

}  // namespace lambda_lab::fourier
