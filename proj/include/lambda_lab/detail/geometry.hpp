#pragma once

// Metric kernels written once over a scalar type S, instantiated for double
// (plain evaluation) and for Jet<3> (exact derivatives along a metric line
// g + e h). Planes are node-value arrays; symmetric tensors use sym_index
// storage and Christoffel symbols are stored as [k * sym_count + sym(i,j)].

#include <cmath>
#include <span>
#include <tuple>
#include <type_traits>
#include <vector>

#include "lambda_lab/fields.hpp"
#include "lambda_lab/fourier.hpp"
#include "lambda_lab/jet.hpp"

namespace lambda_lab::detail {

template <class S>
using Plane = std::vector<S>;

template <class S>
inline double coeff(const S& s, int k) {
  if constexpr (std::is_same_v<S, double>) return k == 0 ? s : 0.0;
  else return s.c[k];
}

template <class S>
inline constexpr int order_of() {
  if constexpr (std::is_same_v<S, double>) return 0;
  else return static_cast<int>(std::tuple_size_v<decltype(S{}.c)>) - 1;
}

/// Coordinate derivative of a plane, taken coefficientwise for jets.
template <class S>
Plane<S> diff(const fourier::Transform& T, const Plane<S>& p, int axis) {
  if constexpr (std::is_same_v<S, double>) {
    return T.derivative(p, axis);
  } else {
    Plane<S> out(p.size());
    std::vector<double> buf(p.size());
    for (int k = 0; k <= order_of<S>(); ++k) {
      for (std::size_t i = 0; i < p.size(); ++i) buf[i] = p[i].c[k];
      const auto d = T.derivative(buf, axis);
      for (std::size_t i = 0; i < p.size(); ++i) out[i].c[k] = d[i];
    }
    return out;
  }
}

/// sum_a D_a F_a, coefficientwise for jets.
template <class S>
Plane<S> divergence(const fourier::Transform& T, const std::vector<Plane<S>>& flux) {
  if constexpr (std::is_same_v<S, double>) {
    return T.divergence(flux);
  } else {
    const std::size_t N = flux[0].size();
    Plane<S> out(N);
    std::vector<std::vector<double>> buf(flux.size(), std::vector<double>(N));
    for (int k = 0; k <= order_of<S>(); ++k) {
      for (std::size_t a = 0; a < flux.size(); ++a)
        for (std::size_t i = 0; i < N; ++i) buf[a][i] = flux[a][i].c[k];
      const auto d = T.divergence(buf);
      for (std::size_t i = 0; i < N; ++i) out[i].c[k] = d[i];
    }
    return out;
  }
}

inline double reciprocal_of(double x) { return 1.0 / x; }
template <int N>
Jet<N> reciprocal_of(const Jet<N>& x) { return reciprocal(x); }
inline double sqrt_of(double x) { return std::sqrt(x); }
template <int N>
Jet<N> sqrt_of(const Jet<N>& x) { return sqrt(x); }

template <class S>
struct Geometry {
  int n = 0;
  std::size_t nodes = 0;
  std::vector<Plane<S>> g;     // sym storage
  std::vector<Plane<S>> ginv;  // sym storage
  Plane<S> mu;                 // sqrt(det g)

  const S& G(int i, int j, std::size_t k) const { return g[sym_index(n, i, j)][k]; }
  const S& Ginv(int i, int j, std::size_t k) const { return ginv[sym_index(n, i, j)][k]; }
};

/// Inverse and density by cofactors, so that jets propagate exactly.
template <class S>
Geometry<S> make_geometry(int n, std::vector<Plane<S>> g) {
  Geometry<S> geo;
  geo.n = n;
  geo.nodes = g[0].size();
  geo.g = std::move(g);
  geo.ginv.assign(sym_count(n), Plane<S>(geo.nodes));
  geo.mu.resize(geo.nodes);
  for (std::size_t k = 0; k < geo.nodes; ++k) {
    auto m = [&](int i, int j) -> const S& { return geo.g[sym_index(n, i, j)][k]; };
    auto inv = [&](int i, int j) -> S& { return geo.ginv[sym_index(n, i, j)][k]; };
    if (n == 2) {
      const S det = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
      const S r = reciprocal_of(det);
      inv(0, 0) = m(1, 1) * r;
      inv(0, 1) = -(m(0, 1) * r);
      inv(1, 1) = m(0, 0) * r;
      geo.mu[k] = sqrt_of(det);
    } else {
      const S c00 = m(1, 1) * m(2, 2) - m(1, 2) * m(1, 2);
      const S c01 = m(0, 2) * m(1, 2) - m(0, 1) * m(2, 2);
      const S c02 = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
      const S c11 = m(0, 0) * m(2, 2) - m(0, 2) * m(0, 2);
      const S c12 = m(0, 1) * m(0, 2) - m(0, 0) * m(1, 2);
      const S c22 = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
      const S det = m(0, 0) * c00 + m(0, 1) * c01 + m(0, 2) * c02;
      const S r = reciprocal_of(det);
      inv(0, 0) = c00 * r;
      inv(0, 1) = c01 * r;
      inv(0, 2) = c02 * r;
      inv(1, 1) = c11 * r;
      inv(1, 2) = c12 * r;
      inv(2, 2) = c22 * r;
      geo.mu[k] = sqrt_of(det);
    }
  }
  return geo;
}

/// Gamma^k_ij = 1/2 g^{kl}(D_i g_jl + D_j g_il - D_l g_ij).
template <class S>
std::vector<Plane<S>> christoffel(const fourier::Transform& T, const Geometry<S>& geo) {
  const int n = geo.n;
  const int sc = sym_count(n);
  // dg[a][sym(i,j)] = D_a g_ij
  std::vector<std::vector<Plane<S>>> dg(n);
  for (int a = 0; a < n; ++a)
    for (int s = 0; s < sc; ++s) dg[a].push_back(diff(T, geo.g[s], a));
  auto D = [&](int a, int i, int j, std::size_t k) -> const S& {
    return dg[a][sym_index(n, i, j)][k];
  };
  std::vector<Plane<S>> gamma(n * sc, Plane<S>(geo.nodes));
  for (std::size_t k = 0; k < geo.nodes; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        S first[3];
        for (int l = 0; l < n; ++l) first[l] = 0.5 * (D(i, j, l, k) + D(j, i, l, k) - D(l, i, j, k));
        for (int m = 0; m < n; ++m) {
          S acc = 0.0;
          for (int l = 0; l < n; ++l) acc += geo.Ginv(m, l, k) * first[l];
          gamma[m * sc + sym_index(n, i, j)][k] = acc;
        }
      }
  return gamma;
}

/// Rc_pq = D_i G^i_pq - D_p G^i_iq + G^i_im G^m_pq - G^i_pm G^m_iq, symmetrized.
template <class S>
std::vector<Plane<S>> ricci(const fourier::Transform& T, const Geometry<S>& geo,
                            const std::vector<Plane<S>>& gamma) {
  const int n = geo.n;
  const int sc = sym_count(n);
  auto G = [&](int m, int i, int j, std::size_t k) -> const S& {
    return gamma[m * sc + sym_index(n, i, j)][k];
  };
  // div_gamma[sym(p,q)] = sum_i D_i Gamma^i_pq
  std::vector<Plane<S>> div_gamma(sc);
  for (int s = 0; s < sc; ++s) {
    std::vector<Plane<S>> flux(n);
    for (int i = 0; i < n; ++i) flux[i] = gamma[i * sc + s];
    div_gamma[s] = divergence(T, flux);
  }
  // trace_gamma[q] = Gamma^i_iq, and its derivatives D_p trace_gamma[q]
  std::vector<Plane<S>> trace_gamma(n, Plane<S>(geo.nodes));
  for (int q = 0; q < n; ++q)
    for (std::size_t k = 0; k < geo.nodes; ++k) {
      S acc = 0.0;
      for (int i = 0; i < n; ++i) acc += G(i, i, q, k);
      trace_gamma[q][k] = acc;
    }
  std::vector<std::vector<Plane<S>>> dtrace(n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) dtrace[p].push_back(diff(T, trace_gamma[q], p));

  std::vector<Plane<S>> rc(sc, Plane<S>(geo.nodes));
  for (std::size_t k = 0; k < geo.nodes; ++k)
    for (int p = 0; p < n; ++p)
      for (int q = p; q < n; ++q) {
        S v = div_gamma[sym_index(n, p, q)][k] - 0.5 * (dtrace[p][q][k] + dtrace[q][p][k]);
        for (int m = 0; m < n; ++m) {
          v += trace_gamma[m][k] * G(m, p, q, k);
          for (int i = 0; i < n; ++i) v -= G(i, p, m, k) * G(m, i, q, k);
        }
        rc[sym_index(n, p, q)][k] = v;
      }
  return rc;
}

template <class S>
Plane<S> scalar_curvature(const Geometry<S>& geo, const std::vector<Plane<S>>& rc) {
  const int n = geo.n;
  Plane<S> r(geo.nodes);
  for (std::size_t k = 0; k < geo.nodes; ++k) {
    S acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) acc += geo.Ginv(i, j, k) * rc[sym_index(n, i, j)][k];
    r[k] = acc;
  }
  return r;
}

/// (1/mu) D_i(mu g^{ij} D_j u) for a plain node function u.
template <class S>
Plane<S> laplace(const fourier::Transform& T, const Geometry<S>& geo, std::span<const double> u) {
  const int n = geo.n;
  const auto du = T.gradient(u);
  std::vector<Plane<S>> flux(n, Plane<S>(geo.nodes));
  for (std::size_t k = 0; k < geo.nodes; ++k)
    for (int i = 0; i < n; ++i) {
      S acc = 0.0;
      for (int j = 0; j < n; ++j) acc += geo.Ginv(i, j, k) * du[j][k];
      flux[i][k] = geo.mu[k] * acc;
    }
  Plane<S> out = divergence(T, flux);
  for (std::size_t k = 0; k < geo.nodes; ++k) out[k] = out[k] * reciprocal_of(geo.mu[k]);
  return out;
}

/// Geometry of a MetricField with plain doubles (uses the cached inverse).
Geometry<double> geometry_of(const MetricField& g);

/// Geometry of the line g + e h as third-order jets.
Geometry<Jet3> jet_geometry(const MetricField& g, const SymTensorField& h);

}  // namespace lambda_lab::detail
