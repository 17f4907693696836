#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lambda_lab/fields.hpp"

namespace lambda_lab::sampling {

// ==== seeded perturbations of the flat torus ====

/// Building blocks of a perturbation k = g - delta.
///   gauge      div* X for a low-mode vector field X
///   conformal  C u for a low-mode function u
///   tt         constant trace-free tensor (the TT directions of a flat torus)
///   flat       constant symmetric tensor (scale plus tt)
enum class Kind { gauge, conformal, tt, flat };

Kind parse_kind(const std::string& name);
std::string to_string(Kind k);

struct SamplerOptions {
  double radius = 0.05;     // C^2 radius of the ball around delta
  double min_scale = 0.1;   // sampled norms lie in [min_scale, 1] * radius
  int kmax = 3;             // Fourier modes |m_i| <= kmax
  std::vector<Kind> kinds{Kind::gauge, Kind::conformal, Kind::tt};
  bool single_mode = false; // one random Fourier mode per generator instead of the full band
};

struct Sample {
  std::uint64_t seed = 0;
  std::size_t index = 0;
  SymTensorField k;                       // g - delta
  std::vector<SymTensorField> parts;      // one per kind, summing to k
  std::vector<Kind> kinds;
  double c2 = 0.0;                        // C^2 norm of k (reference grid)

  MetricField metric() const;
};

/// Sample `index` of the stream `seed`. The random coefficients depend only
/// on (seed, index) and the options, never on the grid, so the same sample
/// evaluated on two grids is the same smooth metric. The C^2 normalization is
/// measured on a fixed 33^n reference grid for the same reason.
Sample draw(const PeriodicGrid& grid, const SamplerOptions& opts, std::uint64_t seed, std::size_t index);

/// Low-mode random fields driven by an explicit seed; the building blocks of draw().
/// With `single` the field is one Fourier mode picked uniformly from the band.
ScalarField random_scalar(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax,
                          bool mean_zero = true, bool single = false);
VectorField random_vector(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax,
                          bool single = false);
SymTensorField random_tensor(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax);

}  // namespace lambda_lab::sampling
