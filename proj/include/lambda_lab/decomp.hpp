#pragma once

#include <string>
#include <vector>

#include "lambda_lab/fields.hpp"

namespace lambda_lab::decomp {

// ==== gauge splitting h = h0 + div* X ====

struct GaugeSplit {
  SymTensorField h0;
  VectorField X;
  double div_residual = 0.0;   // ||div h0||_L2
  double orthogonality = 0.0;  // <h0, div* X>_L2
  int iterations = 0;
};

/// Solves div div* X = div h by CG in the L^2(dV_g) covector inner product.
/// Killing fields (constant covectors at a constant metric) are projected
/// out, so X is mean-zero there. Throws NumericalError(non_convergence).
GaugeSplit gauge_split(const MetricField& g, const SymTensorField& h, double rtol = 1e-12);

// ==== conformal operator ====

/// C u = (Delta u) g - Hess u.
SymTensorField conformal_op(const MetricField& g, const ScalarField& u);
/// Exact L^2(dV_g) adjoint of conformal_op.
ScalarField conformal_adjoint(const MetricField& g, const SymTensorField& k);

// ==== splits at a flat metric ====

/// True when every node carries the same metric coefficients (to 1e-12).
bool is_constant(const MetricField& g);

struct TTSplit {
  double scale = 0.0;            // c in c g
  SymTensorField scale_part;
  ScalarField u;                 // conformal generator, int u dV = 0
  SymTensorField conformal_part; // C u
  SymTensorField tt_part;
  SymTensorField kernel_part;    // component of tt_part in K
  double div_tt = 0.0;           // ||div tt||_L2
  double trace_tt = 0.0;         // ||tr tt||_L2
  double max_orthogonality = 0.0; // largest |<a,b>| / (||a|| ||b||) over component pairs
};

/// ker div = R g + im C + TT at a constant metric, with K extracted from the
/// TT part. Throws InvalidArgument unless g is constant and div h is small.
TTSplit tt_split(const MetricField& g, const SymTensorField& h);

/// L^2-orthogonal projection onto im C (via the least-squares generator u).
SymTensorField project_conformal(const MetricField& g, const SymTensorField& h, ScalarField* u = nullptr);

enum class Sector { all, ker_div, tt, conformal, scale };
Sector parse_sector(const std::string& name);
std::string to_string(Sector s);

struct LichnerowiczSpectrum {
  std::vector<double> values;  // eigenvalues of Delta^L, ascending
  std::vector<SymTensorField> modes;
  int sector_rank = -1;        // dimension of the sector when it is smaller than requested
};

/// The k eigenvalues of Delta^L closest to the top of its (nonpositive)
/// spectrum inside a sector, in ascending order, at a constant metric.
LichnerowiczSpectrum lichnerowicz_spectrum(const MetricField& g, Sector sector, int k);

/// Constant symmetric tensors (the flat-family tangent space), L^2-orthonormal.
std::vector<SymTensorField> flat_family_basis(const MetricField& g);

/// Removes the flat-family tangent component, returning the N-component.
/// Throws InvalidArgument unless g is constant and div h is small.
SymTensorField project_normal(const MetricField& g, const SymTensorField& h);

}  // namespace lambda_lab::decomp
