#pragma once

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "lambda_lab/fields.hpp"
#include "lambda_lab/fourier.hpp"
#include "lambda_lab/linalg.hpp"

namespace lambda_lab::spectral {

using linalg::CVec;
using linalg::Vec;
using Complex = std::complex<double>;

// ==== Schrodinger operator ====

/// H_g = -4 Delta_g + R_g on node values. Self-adjoint in the discrete
/// L^2(dV_g) pairing sum_k w_k u_k v_k with w = sqrt(det g) * cell volume.
class Schrodinger {
 public:
  explicit Schrodinger(const MetricField& g);

  const MetricField& metric() const noexcept { return g_; }
  const fourier::Transform& transform() const noexcept { return T_; }
  const ScalarField& potential() const noexcept { return R_; }
  /// Quadrature weights of L^2(dV_g).
  const Vec& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }

  Vec apply(const Vec& u) const;
  CVec apply(const CVec& u) const;
  ScalarField apply(const ScalarField& u) const;

  /// B^{1/2} H B^{-1/2} with B = weights: an ordinary symmetric operator.
  Vec apply_symmetric(const Vec& y) const;
  const Vec& sqrt_weights() const noexcept { return sqrt_weights_; }

  /// Quadratic form sum_k w_k (4 |du|^2 + R u^2), equal to <u, H u> for the
  /// discrete operator but with far less round-off when u is nearly constant.
  double energy(const Vec& u) const;

  /// Dense matrix of H (oracle use; size N^2).
  Eigen::MatrixXd matrix() const;

  /// 4 k.gbar^{-1}.k for the node-averaged inverse metric; used by preconditioners.
  double model_symbol(const std::array<double, 3>& k) const;

 private:
  MetricField g_;
  fourier::Transform T_;
  ScalarField R_;
  std::vector<std::vector<double>> a_;  // mu g^{ij}, sym storage
  std::vector<double> inv_mu_;
  Vec weights_;
  Vec sqrt_weights_;
  Eigen::Matrix3d mean_ginv_ = Eigen::Matrix3d::Zero();
};

/// Third-order Taylor expansion of e -> H_{g + e h} at e = 0, assembled with
/// jets so that every coefficient is an exact e-derivative of the discrete
/// operator.
class SchrodingerJet {
 public:
  SchrodingerJet(const MetricField& g, const SymTensorField& h);

  /// d^k/de^k H_{g+eh} u at e = 0 for k = 0..3.
  Vec apply(int k, const Vec& u) const;
  CVec apply(int k, const CVec& u) const;

 private:
  fourier::Transform T_;
  int n_;
  std::vector<std::array<std::vector<double>, 4>> a_;  // Taylor coefficients of mu g^{ij}
  std::array<std::vector<double>, 4> inv_mu_;
  std::array<std::vector<double>, 4> R_;
};

// ==== ground state ====

struct SpectralOptions {
  int guard = 4;           // extra LOBPCG block columns beyond k
  double tol = 1e-10;      // eigen-residual tolerance
  int max_iter = 3000;
  double min_gap = 1e-6;   // below this the ground state counts as degenerate
  bool dense = false;      // dense eigendecomposition instead of LOBPCG
};

/// lambda(g), ground state, minimizer and lowest spectrum of one metric.
/// Immutable after construction; safe to share between threads.
struct SpectralData {
  explicit SpectralData(std::shared_ptr<const Schrodinger> op_)
      : w(op_->metric().grid()), f(op_->metric().grid()), op(std::move(op_)) {}

  double lambda = 0.0;
  ScalarField w;
  ScalarField f;
  std::vector<double> spectrum;     // ascending, lowest k
  std::vector<ScalarField> modes;   // L^2(dV_g)-orthonormal eigenfields
  double gap = 0.0;
  double volume = 0.0;
  int iterations = 0;
  std::shared_ptr<const Schrodinger> op;

  const MetricField& metric() const { return op->metric(); }
  const Vec& weights() const { return op->weights(); }
  Vec w_vec() const;
};

/// Throws NumericalError(non_convergence) or NumericalError(gap_collapse).
SpectralData ground_state(const MetricField& g, int k = 4, const SpectralOptions& opts = {});

/// Convenience: lambda(g) only.
double lambda(const MetricField& g, const SpectralOptions& opts = {});

/// Discrete L^2(dV_g) pairing, bilinear (no conjugation).
double pair(const SpectralData& sd, const Vec& a, const Vec& b);
Complex pair(const SpectralData& sd, const Vec& a, const CVec& b);

// ==== resolvent calculus ====

/// x = (z - H)^{-1} b by preconditioned GMRES. Throws
/// NumericalError(near_spectrum) when z is within the conditioning guard of
/// a computed eigenvalue and NumericalError(non_convergence) on failure.
CVec resolvent_solve(const SpectralData& sd, Complex z, const CVec& b, double rtol = 1e-12);

struct ContourOptions {
  double radius = 0.0;  // 0 selects gap / 4
  int points = 64;
  /// F(conj z) = conj F(z), as for every integrand built from real
  /// operators; halves the number of evaluations.
  bool real_integrand = true;
};

/// (1 / 2 pi i) times the integral of F over |z - lambda_1| = r by the
/// trapezoidal rule. Throws InvalidArgument unless 0 < r < gap / 2.
Complex contour_integrate(const SpectralData& sd, const std::function<Complex(Complex)>& F,
                          const ContourOptions& opts = {});
/// Several integrands sharing the same quadrature nodes (and any solves done
/// at them); returns one integral per entry of F(z).
std::vector<Complex> contour_integrate(const SpectralData& sd,
                                       const std::function<std::vector<Complex>(Complex)>& F,
                                       const ContourOptions& opts = {});

/// S b with S = (lambda_1 - H)^{-1} on the L^2 complement of w (S w = 0).
Vec reduced_resolvent_apply(const SpectralData& sd, const Vec& b, double rtol = 1e-12);
ScalarField reduced_resolvent_apply(const SpectralData& sd, const ScalarField& b);

/// JSON summary {lambda, spectrum, gap, vol}.
nlohmann::json summary_json(const SpectralData& sd);

}  // namespace lambda_lab::spectral
