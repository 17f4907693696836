#pragma once

#include <string>
#include <vector>

#include "lambda_lab/fields.hpp"

namespace lambda_lab::manifold {

// Conventions
//   Delta u = (1/mu) D_i(mu g^{ij} D_j u), nonpositive spectrum.
//   R^l_{ipq} = D_i G^l_pq - D_p G^l_iq + G^l_im G^m_pq - G^l_pm G^m_iq,
//   R_{ipjq} = g_jl R^l_{ipq}, Rc_pq = g^{ij} R_{ipjq} (round spheres have Rc > 0).
//   (div h)_j = g^{ik} nabla_i h_kj, div* its exact discrete adjoint, so that
//   the Lie derivative of the metric is L_X g = -2 div* X.
// Derivatives are Fourier pseudo-spectral on the periodic lattice.

/// Levi-Civita coefficients Gamma^k_ij, symmetric in (i, j).
struct Christoffel {
  int n = 0;
  std::vector<std::vector<double>> planes;  // [k * sym_count + sym(i,j)]

  double operator()(int k, int i, int j, std::size_t node) const {
    return planes[k * sym_count(n) + sym_index(n, i, j)][node];
  }
};

Christoffel christoffel(const MetricField& g);

struct Curvature {
  int n = 0;
  std::vector<std::vector<double>> riemann;  // R_{ipjq} at [((i n + p) n + j) n + q]
  SymTensorField ricci;
  ScalarField scalar;

  double riemann_at(int i, int p, int j, int q, std::size_t node) const {
    return riemann[((i * n + p) * n + j) * n + q][node];
  }
};

Curvature curvature(const MetricField& g);
SymTensorField ricci(const MetricField& g);
ScalarField scalar_curvature(const MetricField& g);

/// Coordinate differential du as a covector field.
VectorField differential(const ScalarField& u);
ScalarField laplace_beltrami(const MetricField& g, const ScalarField& u);
SymTensorField hessian(const MetricField& g, const ScalarField& u);

ScalarField trace(const MetricField& g, const SymTensorField& h);
/// Pointwise g(a, b) = g^{ia} g^{jb} a_ij b_ab.
ScalarField pointwise_inner(const MetricField& g, const SymTensorField& a, const SymTensorField& b);
/// Index raising h^{ij} = g^{ia} h_ab g^{bj}; the result is stored like a tensor.
SymTensorField raise(const MetricField& g, const SymTensorField& h);
SymTensorField lower(const MetricField& g, const SymTensorField& h_up);

VectorField divergence(const MetricField& g, const SymTensorField& h);
/// Exact adjoint of divergence in the L^2(dV_g) pairings.
SymTensorField divergence_adjoint(const MetricField& g, const VectorField& X);
/// L_{X#} g = -2 div* X for a covector field X.
SymTensorField lie_derivative(const MetricField& g, const VectorField& X);

/// Connection Laplacian -nabla* nabla on symmetric 2-tensors (exactly self-adjoint).
SymTensorField connection_laplacian(const MetricField& g, const SymTensorField& h);
/// Delta h_ij + 2 R_{ipjq} h^{pq}.
SymTensorField lichnerowicz(const MetricField& g, const SymTensorField& h);
/// Curvature action h -> R_{ipjq} h^{pq}, symmetrized so that it is self-adjoint.
SymTensorField curvature_action(const MetricField& g, const Curvature& curv,
                                const SymTensorField& h);

// ==== integrals and norms ====

/// Node quadrature of u dV_g.
double integrate(const MetricField& g, const ScalarField& u);
/// L^2(dV_g) pairings, optionally weighted by e^{-f}.
double inner(const MetricField& g, const ScalarField& a, const ScalarField& b,
             const ScalarField* f = nullptr);
double inner(const MetricField& g, const VectorField& a, const VectorField& b,
             const ScalarField* f = nullptr);
double inner(const MetricField& g, const SymTensorField& a, const SymTensorField& b,
             const ScalarField* f = nullptr);

enum class NormKind { l2, l2_f, h1, h2, c0, c1, c2, c3 };

/// Parses "L2", "L2_f", "H1", "H2", "C0".."C3"; throws InvalidArgument otherwise.
NormKind parse_norm_kind(const std::string& name);
std::string to_string(NormKind kind);

/// Quadrature norms. Sobolev and C^k norms use coordinate partial derivatives
/// measured with g, so that ||.||_L2 <= ||.||_H1 <= ||.||_H2. C^k is the sum of
/// sup norms of the derivatives of order 0..k. L2_f needs f.
double norm(const MetricField& g, const ScalarField& u, NormKind kind, const ScalarField* f = nullptr);
double norm(const MetricField& g, const VectorField& X, NormKind kind, const ScalarField* f = nullptr);
double norm(const MetricField& g, const SymTensorField& h, NormKind kind, const ScalarField* f = nullptr);

}  // namespace lambda_lab::manifold
