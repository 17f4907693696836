#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lambda_lab/fields.hpp"
#include "lambda_lab/sampling.hpp"
#include "lambda_lab/spectral.hpp"

namespace lambda_lab::variation {

using spectral::SpectralData;

// ==== first-order operator variations ====

/// H'[h] u = 4 <h, Hess u> + 4 <div h, du> - 2 <d tr h, du>
///           + (div div h - Delta tr h - <h, Rc>) u,
/// assembled term by term from the manifold operators.
ScalarField h_prime_apply(const MetricField& g, const SymTensorField& h, const ScalarField& u);

/// d^k/de^k H_{g+eh} u at e = 0, exact for the discrete operator (jets).
ScalarField h_derivative_apply(const MetricField& g, const SymTensorField& h, int k, const ScalarField& u);

/// The same derivative from H_{g+eh} assembled at the five points
/// e in {-2, -1, 0, 1, 2} * step (fourth-order stencils for k = 1, 2,
/// second-order for k = 3).
ScalarField h_derivative_stencil(const MetricField& g, const SymTensorField& h, int k, const ScalarField& u,
                                 double step = 1e-3);

/// Relative asymmetry |<u,Av> - <Au,v>| / (|<u,Av>| + |<Au,v>|) in L^2(dV_g).
/// H_{g+eh} is self-adjoint for the moving measure dV_{g+eh}, so at fixed
/// measure H'[h] itself is symmetric only when tr h = 0. The measure-corrected
/// operator H'[h] + (1/2)(tr h) H is symmetric for every h.
struct SymmetryResidual {
  double fixed_measure = 0.0;  // A = H'[h]
  double corrected = 0.0;      // A = H'[h] + (1/2)(tr h) H
};

SymmetryResidual h_prime_symmetry(const MetricField& g, const SymTensorField& h, const ScalarField& u,
                                  const ScalarField& v);

// ==== perturbation series ====

/// Building blocks of the perturbation series, all bilinear L^2(dV_g)
/// pairings with the ground state w and the reduced resolvent S.
struct SeriesTerms {
  double h1 = 0.0;     // <w, H' w>
  double h2 = 0.0;     // <w, H'' w>
  double h3 = 0.0;     // <w, H''' w>
  double s11 = 0.0;    // <w, H' S H' w>
  double s111 = 0.0;   // <w, H' S H' S H' w>
  double ss11 = 0.0;   // <w, H' S^2 H' w>
  double s12 = 0.0;    // <w, H' S H'' w>
  double s21 = 0.0;    // <w, H'' S H' w>

  double first() const { return h1; }
  double second() const { return h2 + 2.0 * s11; }
  double third() const { return h3 + 6.0 * s111 + 3.0 * s12 + 3.0 * s21 - 6.0 * h1 * ss11; }
};

SeriesTerms series_terms(const SpectralData& sd, const SymTensorField& h, int order = 3);

/// The contour integrals of the second and third derivative formulas,
/// evaluated with resolvent solves on |z - lambda| = r. Each entry is the
/// full term including its numeric prefactor.
struct ContourTerms {
  double order2 = 0.0;  // (2/2 pi i) oint <w,H'R H'w> dz/(z-lambda)
  double t2 = 0.0;      // (6/2 pi i) oint <w,H'R H'R H'w> dz/(z-lambda)
  double t3 = 0.0;      // (3/2 pi i) oint <w,H'R H''w> dz/(z-lambda)
  double t4 = 0.0;      // (3/2 pi i) oint <w,H''R H'w> dz/(z-lambda)
  double t5 = 0.0;      // -<w,H'w> (6/2 pi i) oint <w,H'R H'w> dz/(z-lambda)^2
  double radius = 0.0;
};

ContourTerms contour_terms(const SpectralData& sd, const SymTensorField& h, const spectral::ContourOptions& opts = {});

/// The same five quantities from the series blocks (their residues).
ContourTerms residue_terms(const SeriesTerms& s);

// ==== variations of lambda ====

enum class Method { perelman, series, contour, closed_form, finite_difference };
std::string to_string(Method m);
Method parse_method(const std::string& name);

struct VariationResult {
  int order = 1;
  double value = 0.0;
  Method method = Method::series;
  std::string g_id;
  std::string h_id;
  std::uint64_t seed = 0;
  /// |value - reference| for the cross-check recorded with this result
  /// (perelman vs series at order 1, series vs finite difference otherwise).
  double cross_error = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();
  double contour_radius = 0.0;
  double fd_step = 0.0;
  int richardson_levels = 0;
};

/// Perelman's formula -int <h, Rc + Hess f> e^{-f} dV; the series value
/// <w, H' w> is the recorded reference.
VariationResult first_variation(const SpectralData& sd, const SymTensorField& h);
/// Series value via the reduced resolvent; the contour value is the reference.
VariationResult second_variation(const SpectralData& sd, const SymTensorField& h);
/// (1 / 2 Vol) int <h, Delta^L h> dV. Throws InvalidArgument unless g is
/// Ricci-flat (within 1e-8) and div h is small.
VariationResult second_variation_ricci_flat(const MetricField& g, const SymTensorField& h);
/// Series value of the third derivative; the contour value is the reference.
VariationResult third_variation(const SpectralData& sd, const SymTensorField& h);

struct FdOptions {
  std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
  spectral::SpectralOptions spectral{};
};

/// Centered finite differences of e -> lambda(g + e h) on a halving step
/// ladder, Richardson-extrapolated in e^2.
VariationResult fd_variation(const MetricField& g, const SymTensorField& h, int order, const FdOptions& opts = {});

/// Default step ladder for a given order.
FdOptions default_fd_options(int order);

/// Orders 1-3 with every applicable method and cross errors against FD.
std::vector<VariationResult> evaluate_all(const MetricField& g, const SymTensorField& h, const std::string& g_id,
                                          const std::string& h_id, std::uint64_t seed = 0);

/// CSV with columns order,method,value,cross_error,g_id,h_id,seed.
void write_csv(std::ostream& os, const std::vector<VariationResult>& rows);

// ==== gradient of lambda ====

struct GradientField {
  SymTensorField field;        // Rc + Hess f
  SymTensorField ricci;
  SymTensorField hess_f;
  ScalarField f;
  double lambda = 0.0;
  double orthogonality = 0.0;  // <Hess f, Rc + Hess f>_{L^2_f}
  double norm_f = 0.0;         // ||Rc + Hess f||_{L^2_f}
  double ricci_norm_f = 0.0;   // ||Rc||_{L^2_f}
  double ricci_norm = 0.0;     // ||Rc||_{L^2}
  double norm = 0.0;           // ||Rc + Hess f||_{L^2}
};

GradientField gradient_field(const SpectralData& sd);
GradientField gradient_field(const MetricField& g);

struct Linearization {
  SymTensorField gradient_rate;  // -1/2 Delta^L h
  ScalarField f_rate;            // 1/2 tr h
};

/// Derivatives of Rc + Hess f and of f along g_RF + t h at t = 0. Throws
/// InvalidArgument unless g is flat and div h is small.
Linearization linearized_gradient(const MetricField& g, const SymTensorField& h);

struct TaylorRemainder {
  double remainder = 0.0;  // ||gradient_field(gbar + h) + 1/2 Delta^L_{g_RF} h||_{L^2}
  double bound1 = 0.0;     // ||h||_{C^2} ||h||_{H^2}
  double bound2 = 0.0;     // ||gbar - g_RF||_{C^2} ||h||_{H^2}
};

/// Throws InvalidArgument unless gbar is a constant positive metric and
/// div_{g_RF} h is small.
TaylorRemainder taylor_remainder(const MetricField& g_rf, const MetricField& gbar, const SymTensorField& h);

// ==== scans ====

struct BoundScanRow {
  std::size_t index = 0;
  std::vector<double> s;
  std::vector<double> ratio;  // |D^3 lambda| / (||h||_{C^2} ||h||^2_{H^1}) per s
  double spread = 1.0;        // max ratio / min ratio over the ladder
};

struct BoundScanReport {
  std::vector<BoundScanRow> rows;
  double max_ratio = 0.0;
  double max_spread = 1.0;
};

/// For sampled base points g in the C^2 ball and unit directions h0,
/// records |D^3 lambda(g)[h]| / (||h||_{C^2} ||h||^2_{H^1}) along h = s h0.
/// Norms of h are measured with the flat metric.
BoundScanReport third_variation_bound_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                           const std::vector<double>& ladder = {0.02, 0.01, 0.005});

struct LambdaSignRow {
  std::size_t index = 0;
  double lambda = 0.0;
  double normal_h1 = 0.0;  // H^1 norm of the normal component of g - delta
  bool flat_member = false;
};

struct LambdaSignReport {
  std::vector<LambdaSignRow> rows;
  double max_lambda = -std::numeric_limits<double>::infinity();
  std::size_t strict_violations = 0;  // normal part > 1e-3 but lambda >= -1e-10
  std::size_t flat_violations = 0;    // flat member with |lambda| > 1e-10
};

/// lambda over sampled metrics in the C^2 ball (mixtures, plus every
/// `flat_every`-th sample drawn from the flat family).
LambdaSignReport lambda_sign_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                  const sampling::SamplerOptions& opts = {}, std::size_t flat_every = 10);

/// Normal component (gauge-free, orthogonal to the flat family) of a
/// perturbation k of the flat metric.
SymTensorField normal_component(const MetricField& flat, const SymTensorField& k);

}  // namespace lambda_lab::variation
