#include "lambda_lab/manifold.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lambda_lab/detail/geometry.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/fourier.hpp"

namespace lambda_lab {

namespace detail {

Geometry<double> geometry_of(const MetricField& g) {
  Geometry<double> geo;
  geo.n = g.dim();
  geo.nodes = g.grid().node_count();
  for (int s = 0; s < sym_count(geo.n); ++s) {
    auto gs = g.g().component(s);
    auto is = g.ginv().component(s);
    geo.g.emplace_back(gs.begin(), gs.end());
    geo.ginv.emplace_back(is.begin(), is.end());
  }
  auto mu = g.sqrt_det().component(0);
  geo.mu.assign(mu.begin(), mu.end());
  return geo;
}

Geometry<Jet3> jet_geometry(const MetricField& g, const SymTensorField& h) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  std::vector<Plane<Jet3>> planes(sym_count(n), Plane<Jet3>(N));
  for (int s = 0; s < sym_count(n); ++s)
    for (std::size_t k = 0; k < N; ++k) planes[s][k] = Jet3::line(g.g()(s, k), h(s, k));
  return make_geometry(n, std::move(planes));
}

}  // namespace detail

namespace manifold {

namespace {

using detail::Plane;

double ginv(const MetricField& g, int i, int j, std::size_t k) { return g.ginv_at(i, j, k); }

// Full n x n (or n^3) node arrays built from symmetric storage.
std::vector<std::vector<double>> full_planes(const SymTensorField& h) {
  const int n = h.dim();
  std::vector<std::vector<double>> out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto c = h.component(sym_index(n, i, j));
      out.emplace_back(c.begin(), c.end());
    }
  return out;
}

SymTensorField from_full_symmetrized(const PeriodicGrid& grid,
                                     const std::vector<std::vector<double>>& full) {
  const int n = grid.dim();
  SymTensorField h(grid);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      auto c = h.component(sym_index(n, i, j));
      for (std::size_t k = 0; k < c.size(); ++k)
        c[k] = 0.5 * (full[i * n + j][k] + full[j * n + i][k]);
    }
  return h;
}

}  // namespace

Christoffel christoffel(const MetricField& g) {
  const fourier::Transform T(g.grid());
  Christoffel c;
  c.n = g.dim();
  c.planes = detail::christoffel(T, detail::geometry_of(g));
  return c;
}

Curvature curvature(const MetricField& g) {
  const int n = g.dim();
  const int sc = sym_count(n);
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const auto geo = detail::geometry_of(g);
  const auto gamma = detail::christoffel(T, geo);
  const auto rc = detail::ricci(T, geo, gamma);
  const auto r = detail::scalar_curvature(geo, rc);

  Curvature out{n, {}, SymTensorField(g.grid()), ScalarField(g.grid())};
  for (int s = 0; s < sc; ++s) std::copy(rc[s].begin(), rc[s].end(), out.ricci.component(s).begin());
  std::copy(r.begin(), r.end(), out.scalar.component(0).begin());

  // dgamma[a][m * sc + s] = D_a Gamma^m_s
  std::vector<std::vector<std::vector<double>>> dgamma(n);
  for (int a = 0; a < n; ++a)
    for (const auto& p : gamma) dgamma[a].push_back(T.derivative(p, a));
  auto G = [&](int m, int i, int j, std::size_t k) { return gamma[m * sc + sym_index(n, i, j)][k]; };
  auto DG = [&](int a, int m, int i, int j, std::size_t k) {
    return dgamma[a][m * sc + sym_index(n, i, j)][k];
  };

  out.riemann.assign(n * n * n * n, std::vector<double>(N, 0.0));
  double up[3][3][3][3];  // R^l_{ipq} as up[l][i][p][q]
  for (std::size_t k = 0; k < N; ++k) {
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) {
            double v = DG(i, l, p, q, k) - DG(p, l, i, q, k);
            for (int m = 0; m < n; ++m) v += G(l, i, m, k) * G(m, p, q, k) - G(l, p, m, k) * G(m, i, q, k);
            up[l][i][p][q] = v;
          }
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < n; ++p)
        for (int j = 0; j < n; ++j)
          for (int q = 0; q < n; ++q) {
            double v = 0.0;
            for (int l = 0; l < n; ++l) v += g.g_at(j, l, k) * up[l][i][p][q];
            out.riemann[((i * n + p) * n + j) * n + q][k] = v;
          }
  }
  return out;
}

SymTensorField ricci(const MetricField& g) {
  const int n = g.dim();
  const fourier::Transform T(g.grid());
  const auto geo = detail::geometry_of(g);
  const auto rc = detail::ricci(T, geo, detail::christoffel(T, geo));
  SymTensorField out(g.grid());
  for (int s = 0; s < sym_count(n); ++s) std::copy(rc[s].begin(), rc[s].end(), out.component(s).begin());
  return out;
}

ScalarField scalar_curvature(const MetricField& g) {
  const fourier::Transform T(g.grid());
  const auto geo = detail::geometry_of(g);
  const auto r = detail::scalar_curvature(geo, detail::ricci(T, geo, detail::christoffel(T, geo)));
  return ScalarField(g.grid(), r);
}

VectorField differential(const ScalarField& u) {
  const fourier::Transform T(u.grid());
  const auto du = T.gradient(u.component(0));
  VectorField X(u.grid());
  for (int a = 0; a < u.dim(); ++a) std::copy(du[a].begin(), du[a].end(), X.component(a).begin());
  return X;
}

ScalarField laplace_beltrami(const MetricField& g, const ScalarField& u) {
  const fourier::Transform T(g.grid());
  return ScalarField(g.grid(), detail::laplace(T, detail::geometry_of(g), u.component(0)));
}

SymTensorField hessian(const MetricField& g, const ScalarField& u) {
  const int n = g.dim();
  const fourier::Transform T(g.grid());
  const auto gamma = christoffel(g);
  const auto du = T.gradient(u.component(0));
  SymTensorField H(g.grid());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto d2 = T.second_derivative(u.component(0), i, j);
      auto c = H.component(sym_index(n, i, j));
      for (std::size_t k = 0; k < c.size(); ++k) {
        double v = d2[k];
        for (int m = 0; m < n; ++m) v -= gamma(m, i, j, k) * du[m][k];
        c[k] = v;
      }
    }
  return H;
}

ScalarField trace(const MetricField& g, const SymTensorField& h) {
  const int n = g.dim();
  ScalarField t(g.grid());
  for (std::size_t k = 0; k < t.nodes(); ++k) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v += ginv(g, i, j, k) * h.at(i, j, k);
    t[k] = v;
  }
  return t;
}

SymTensorField raise(const MetricField& g, const SymTensorField& h) {
  const int n = g.dim();
  SymTensorField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k) {
    double tmp[3][3];
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < n; ++b) {
        double v = 0.0;
        for (int a = 0; a < n; ++a) v += ginv(g, i, a, k) * h.at(a, b, k);
        tmp[i][b] = v;
      }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        for (int b = 0; b < n; ++b) v += tmp[i][b] * ginv(g, b, j, k);
        out.at(i, j, k) = v;
      }
  }
  return out;
}

SymTensorField lower(const MetricField& g, const SymTensorField& h_up) {
  const int n = g.dim();
  SymTensorField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k) {
    double tmp[3][3];
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < n; ++b) {
        double v = 0.0;
        for (int a = 0; a < n; ++a) v += g.g_at(i, a, k) * h_up.at(a, b, k);
        tmp[i][b] = v;
      }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        for (int b = 0; b < n; ++b) v += tmp[i][b] * g.g_at(b, j, k);
        out.at(i, j, k) = v;
      }
  }
  return out;
}

ScalarField pointwise_inner(const MetricField& g, const SymTensorField& a, const SymTensorField& b) {
  const int n = g.dim();
  const SymTensorField up = raise(g, a);
  ScalarField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v += up.at(i, j, k) * b.at(i, j, k);
    out[k] = v;
  }
  return out;
}

// ==== divergence and its adjoint ====

VectorField divergence(const MetricField& g, const SymTensorField& h) {
  const int n = g.dim();
  const int sc = sym_count(n);
  const fourier::Transform T(g.grid());
  const auto gamma = christoffel(g);
  // dh[i][sym(k,j)] = D_i h_kj
  std::vector<std::vector<std::vector<double>>> dh(n);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < sc; ++s) dh[i].push_back(T.derivative(h.component(s), i));

  VectorField out(g.grid());
  for (std::size_t node = 0; node < out.nodes(); ++node)
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          double t = dh[i][sym_index(n, k, j)][node];
          for (int m = 0; m < n; ++m)
            t -= gamma(m, i, k, node) * h.at(m, j, node) + gamma(m, i, j, node) * h.at(k, m, node);
          v += ginv(g, i, k, node) * t;
        }
      out(j, node) = v;
    }
  return out;
}

SymTensorField divergence_adjoint(const MetricField& g, const VectorField& X) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const auto gamma = christoffel(g);
  const auto& mu = g.sqrt_det();

  // E^j = mu g^{jl} X_l ; F^{ikj} = g^{ik} E^j
  std::vector<std::vector<double>> E(n, std::vector<double>(N));
  for (std::size_t k = 0; k < N; ++k)
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      for (int l = 0; l < n; ++l) v += ginv(g, j, l, k) * X(l, k);
      E[j][k] = mu[k] * v;
    }

  std::vector<std::vector<double>> G(n * n, std::vector<double>(N, 0.0));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::vector<std::vector<double>> flux(n, std::vector<double>(N));
      for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < N; ++k) flux[i][k] = ginv(g, i, a, k) * E[b][k];
      const auto d = T.divergence(flux);
      for (std::size_t k = 0; k < N; ++k) G[a * n + b][k] = -d[k];
    }
  for (std::size_t k = 0; k < N; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        // F^{ikb} Gamma^a_ik + F^{iaj} Gamma^b_ij with F^{ikj} = g^{ik} E^j
        double t1 = 0.0, t2 = 0.0;
        for (int i = 0; i < n; ++i)
          for (int c = 0; c < n; ++c) {
            t1 += ginv(g, i, c, k) * E[b][k] * gamma(a, i, c, k);
            t2 += ginv(g, i, a, k) * E[c][k] * gamma(b, i, c, k);
          }
        G[a * n + b][k] -= t1 + t2;
      }
  SymTensorField up = from_full_symmetrized(g.grid(), G);
  for (int s = 0; s < sym_count(n); ++s) {
    auto c = up.component(s);
    for (std::size_t k = 0; k < N; ++k) c[k] /= mu[k];
  }
  return lower(g, up);
}

SymTensorField lie_derivative(const MetricField& g, const VectorField& X) {
  return -2.0 * divergence_adjoint(g, X);
}

// ==== Laplacians on symmetric tensors ====

SymTensorField connection_laplacian(const MetricField& g, const SymTensorField& h) {
  const int n = g.dim();
  const int sc = sym_count(n);
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const auto gamma = christoffel(g);
  const auto& mu = g.sqrt_det();

  // nabla h as [k * sc + sym(i,j)]
  std::vector<std::vector<double>> nh(n * sc);
  for (int k = 0; k < n; ++k)
    for (int s = 0; s < sc; ++s) nh[k * sc + s] = T.derivative(h.component(s), k);
  for (std::size_t node = 0; node < N; ++node)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double v = 0.0;
          for (int m = 0; m < n; ++m)
            v += gamma(m, k, i, node) * h.at(m, j, node) + gamma(m, k, j, node) * h.at(i, m, node);
          nh[k * sc + sym_index(n, i, j)][node] -= v;
        }

  // E^{kij} = mu g^{ka} g^{ib} g^{jc} (nabla h)_{abc}, full storage [(k n + i) n + j]
  std::vector<std::vector<double>> E(n * n * n, std::vector<double>(N));
  for (std::size_t node = 0; node < N; ++node) {
    double A[3][3][3], B[3][3][3];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) A[a][b][c] = nh[a * sc + sym_index(n, b, c)][node];
    // raise slot 1
    for (int k = 0; k < n; ++k)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double v = 0.0;
          for (int a = 0; a < n; ++a) v += ginv(g, k, a, node) * A[a][b][c];
          B[k][b][c] = v;
        }
    // raise slot 2
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) {
          double v = 0.0;
          for (int b = 0; b < n; ++b) v += ginv(g, i, b, node) * B[k][b][c];
          A[k][i][c] = v;
        }
    // raise slot 3
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = 0.0;
          for (int c = 0; c < n; ++c) v += ginv(g, j, c, node) * A[k][i][c];
          E[(k * n + i) * n + j][node] = mu[node] * v;
        }
  }

  // G^{ab} = -D_k E^{kab} - E^{kib} Gamma^a_ki - E^{kaj} Gamma^b_kj
  std::vector<std::vector<double>> G(n * n, std::vector<double>(N));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::vector<std::vector<double>> flux(n);
      for (int k = 0; k < n; ++k) flux[k] = E[(k * n + a) * n + b];
      const auto d = T.divergence(flux);
      for (std::size_t node = 0; node < N; ++node) {
        double v = -d[node];
        for (int k = 0; k < n; ++k)
          for (int i = 0; i < n; ++i)
            v -= E[(k * n + i) * n + b][node] * gamma(a, k, i, node) +
                 E[(k * n + a) * n + i][node] * gamma(b, k, i, node);
        G[a * n + b][node] = v;
      }
    }
  SymTensorField up = from_full_symmetrized(g.grid(), G);
  for (int s = 0; s < sc; ++s) {
    auto c = up.component(s);
    for (std::size_t node = 0; node < N; ++node) c[node] = -c[node] / mu[node];
  }
  return lower(g, up);
}

SymTensorField curvature_action(const MetricField& g, const Curvature& curv, const SymTensorField& h) {
  const int n = g.dim();
  const SymTensorField up = raise(g, h);
  SymTensorField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) {
            const double r = 0.25 * (curv.riemann_at(i, p, j, q, k) + curv.riemann_at(p, i, q, j, k) +
                                     curv.riemann_at(j, p, i, q, k) + curv.riemann_at(p, j, q, i, k));
            v += r * up.at(p, q, k);
          }
        out.at(i, j, k) = v;
      }
  return out;
}

SymTensorField lichnerowicz(const MetricField& g, const SymTensorField& h) {
  SymTensorField out = connection_laplacian(g, h);
  out.axpy(2.0, curvature_action(g, curvature(g), h));
  return out;
}

// ==== integrals and norms ====

double integrate(const MetricField& g, const ScalarField& u) {
  const auto w = g.weights();
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * u[k];
  return s;
}

namespace {

std::vector<double> measure(const MetricField& g, const ScalarField* f) {
  auto w = g.weights();
  if (f)
    for (std::size_t k = 0; k < w.size(); ++k) w[k] *= std::exp(-(*f)[k]);
  return w;
}

// |T|^2_g at a node for a full rank-r tensor given as n^r values.
double pointwise_sq(const MetricField& g, int rank, std::vector<double> t, std::size_t node) {
  const int n = g.dim();
  const std::vector<double> orig = t;
  int stride = 1;
  for (int s = 0; s < rank; ++s) stride *= n;
  std::vector<double> tmp(t.size());
  // raise slot s: index = (... i_s ...) with slot weight n^{rank-1-s}
  int w = stride;
  for (int s = 0; s < rank; ++s) {
    w /= n;
    for (std::size_t idx = 0; idx < t.size(); ++idx) {
      const int is = static_cast<int>(idx / w) % n;
      const std::size_t base = idx - static_cast<std::size_t>(is) * w;
      double v = 0.0;
      for (int a = 0; a < n; ++a) v += g.ginv_at(is, a, node) * t[base + static_cast<std::size_t>(a) * w];
      tmp[idx] = v;
    }
    t.swap(tmp);
  }
  double s = 0.0;
  for (std::size_t idx = 0; idx < t.size(); ++idx) s += t[idx] * orig[idx];
  return s;
}

double norm_full(const MetricField& g, int rank, std::vector<std::vector<double>> planes,
                 NormKind kind, const ScalarField* f) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  if (kind == NormKind::l2_f && !f) throw InvalidArgument("norm: L2_f requires the function f");

  int levels = 0;
  switch (kind) {
    case NormKind::h1: case NormKind::c1: levels = 1; break;
    case NormKind::h2: case NormKind::c2: levels = 2; break;
    case NormKind::c3: levels = 3; break;
    default: levels = 0;
  }
  const bool sup = kind == NormKind::c0 || kind == NormKind::c1 || kind == NormKind::c2 ||
                   kind == NormKind::c3;
  const auto w = measure(g, kind == NormKind::l2_f ? f : nullptr);
  const fourier::Transform T(g.grid());

  double total = 0.0;
  int r = rank;
  for (int level = 0; level <= levels; ++level) {
    if (level > 0) {
      std::vector<std::vector<double>> next;
      next.reserve(planes.size() * n);
      for (int a = 0; a < n; ++a)
        for (const auto& p : planes) next.push_back(T.derivative(p, a));
      planes.swap(next);
      ++r;
    }
    double acc = 0.0;
    std::vector<double> vals(planes.size());
    for (std::size_t k = 0; k < N; ++k) {
      for (std::size_t c = 0; c < planes.size(); ++c) vals[c] = planes[c][k];
      const double sq = std::max(0.0, pointwise_sq(g, r, vals, k));
      if (sup) acc = std::max(acc, std::sqrt(sq));
      else acc += w[k] * sq;
    }
    total += acc;
  }
  return sup ? total : std::sqrt(total);
}

}  // namespace

double inner(const MetricField& g, const ScalarField& a, const ScalarField& b, const ScalarField* f) {
  const auto w = measure(g, f);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * a[k] * b[k];
  return s;
}

double inner(const MetricField& g, const VectorField& a, const VectorField& b, const ScalarField* f) {
  const int n = g.dim();
  const auto w = measure(g, f);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v += g.ginv_at(i, j, k) * a(i, k) * b(j, k);
    s += w[k] * v;
  }
  return s;
}

double inner(const MetricField& g, const SymTensorField& a, const SymTensorField& b,
             const ScalarField* f) {
  const auto w = measure(g, f);
  const ScalarField p = pointwise_inner(g, a, b);
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * p[k];
  return s;
}

NormKind parse_norm_kind(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "L2") return NormKind::l2;
  if (s == "L2_F" || s == "L2F") return NormKind::l2_f;
  if (s == "H1") return NormKind::h1;
  if (s == "H2") return NormKind::h2;
  if (s == "C0") return NormKind::c0;
  if (s == "C1") return NormKind::c1;
  if (s == "C2") return NormKind::c2;
  if (s == "C3") return NormKind::c3;
  throw InvalidArgument("norm: unknown kind '" + name + "'");
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::l2: return "L2";
    case NormKind::l2_f: return "L2_f";
    case NormKind::h1: return "H1";
    case NormKind::h2: return "H2";
    case NormKind::c0: return "C0";
    case NormKind::c1: return "C1";
    case NormKind::c2: return "C2";
    case NormKind::c3: return "C3";
  }
  return "?";
}

double norm(const MetricField& g, const ScalarField& u, NormKind kind, const ScalarField* f) {
  auto c = u.component(0);
  return norm_full(g, 0, {std::vector<double>(c.begin(), c.end())}, kind, f);
}

double norm(const MetricField& g, const VectorField& X, NormKind kind, const ScalarField* f) {
  std::vector<std::vector<double>> planes;
  for (int a = 0; a < X.dim(); ++a) {
    auto c = X.component(a);
    planes.emplace_back(c.begin(), c.end());
  }
  return norm_full(g, 1, std::move(planes), kind, f);
}

double norm(const MetricField& g, const SymTensorField& h, NormKind kind, const ScalarField* f) {
  return norm_full(g, 2, full_planes(h), kind, f);
}

}  // namespace manifold
}  // namespace lambda_lab
