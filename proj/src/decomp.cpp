#include "lambda_lab/decomp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "lambda_lab/error.hpp"
#include "lambda_lab/fourier.hpp"
#include "lambda_lab/linalg.hpp"
#include "lambda_lab/manifold.hpp"

namespace lambda_lab::decomp {

using linalg::Mat;
using linalg::Vec;

namespace {

Vec flat_vec(const std::vector<double>& d) { return Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size())); }

template <class F>
F field_of(const PeriodicGrid& grid, const Vec& v) {
  return F(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

/// Node-averaged inverse metric.
Eigen::MatrixXd mean_ginv(const MetricField& g) {
  const int n = g.dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < g.grid().node_count(); ++k) m += g.ginv().matrix(k);
  return m / static_cast<double>(g.grid().node_count());
}

double mean_weight(const MetricField& g) {
  double s = 0.0;
  for (double w : g.weights()) s += w;
  return s / static_cast<double>(g.grid().node_count());
}

double norm2(const MetricField& g, const SymTensorField& h) { return std::sqrt(std::max(0.0, manifold::inner(g, h, h))); }

/// Per-node Gram matrix of the tensor inner product in sym storage.
Eigen::MatrixXd sym_gram(const Eigen::MatrixXd& ginv) {
  const int n = static_cast<int>(ginv.rows());
  const int sc = sym_count(n);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(sc, sc);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) Q(sym_index(n, i, j), sym_index(n, a, b)) += ginv(i, a) * ginv(j, b);
  return Q;
}

void require_constant(const MetricField& g, const char* what) {
  if (!is_constant(g)) throw InvalidArgument(std::string(what) + ": requires a constant (flat) metric");
}

void require_divergence_free(const MetricField& g, const SymTensorField& h, const char* what) {
  const VectorField dh = manifold::divergence(g, h);
  const double div_norm = std::sqrt(std::max(0.0, manifold::inner(g, dh, dh)));
  if (div_norm > 1e-6 * manifold::norm(g, h, manifold::NormKind::h1) + 1e-12)
    throw InvalidArgument(std::string(what) + ": input is not divergence-free (||div h|| = " +
                          std::to_string(div_norm) + ")");
}

}  // namespace

// ==== gauge splitting ====

GaugeSplit gauge_split(const MetricField& g, const SymTensorField& h, double rtol) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const auto w = g.weights();

  // (G X)_i = w g^{ij} X_j turns the L^2(dV_g) covector pairing into the Euclidean one
  auto apply_G = [&](const Vec& x) {
    Vec y = Vec::Zero(x.size());
    for (std::size_t k = 0; k < N; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y[i * N + k] += w[k] * g.ginv_at(i, j, k) * x[j * N + k];
    return y;
  };
  auto A = [&](const Vec& x) {
    const auto X = field_of<VectorField>(g.grid(), x);
    return apply_G(flat_vec(manifold::divergence(g, manifold::divergence_adjoint(g, X)).data()));
  };

  // Preconditioner (Gbar Abar)^{-1} with Abar(k) = 1/2 (|k|^2 I + k v^T), v = gbar^{-1} k
  const Eigen::MatrixXd gi = mean_ginv(g);
  const Eigen::MatrixXd gbar = gi.inverse();
  const double wbar = mean_weight(g);
  const bool flat = is_constant(g);

  // Rayleigh block on constant covectors for the k = 0 mode of a non-flat metric
  Eigen::MatrixXd B0inv = Eigen::MatrixXd::Zero(n, n);
  if (!flat) {
    Eigen::MatrixXd B0(n, n);
    for (int b = 0; b < n; ++b) {
      Vec e = Vec::Zero(n * N);
      e.segment(b * N, N).setOnes();
      const Vec Ae = A(e);
      for (int a = 0; a < n; ++a) B0(a, b) = Ae.segment(a * N, N).sum();
    }
    B0 = 0.5 * (B0 + B0.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B0);
    const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    for (int i = 0; i < n; ++i) {
      const double ev = es.eigenvalues()(i);
      if (ev > 1e-14 * top) B0inv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev;
    }
  }

  auto M = [&](const Vec& r) {
    std::vector<fourier::Spectrum> spec(n);
    for (int a = 0; a < n; ++a) {
      // Gbar^{-1} r
      std::vector<double> c(N, 0.0);
      for (int b = 0; b < n; ++b)
        for (std::size_t k = 0; k < N; ++k) c[k] += gbar(a, b) * r[b * N + k] / wbar;
      spec[a] = T.forward(c);
    }
    for (std::size_t m = 0; m < T.modes(); ++m) {
      const auto& kw = T.wavevector(m);
      Eigen::VectorXd k(n);
      for (int a = 0; a < n; ++a) k[a] = kw[a];
      const Eigen::VectorXd v = gi * k;
      const double k2 = k.dot(v);
      Eigen::VectorXcd x(n);
      for (int a = 0; a < n; ++a) x[a] = spec[a][m];
      if (k2 == 0.0) {
        x.setZero();
      } else {
        const Eigen::MatrixXd inv = (2.0 / k2) * (Eigen::MatrixXd::Identity(n, n) - k * v.transpose() / (2.0 * k2));
        x = inv.cast<std::complex<double>>() * x;
      }
      for (int a = 0; a < n; ++a) spec[a][m] = x[a];
    }
    Vec out(n * N);
    for (int a = 0; a < n; ++a) {
      const auto c = T.inverse(spec[a]);
      std::copy(c.begin(), c.end(), out.data() + a * N);
    }
    if (!flat) {
      Eigen::VectorXd s(n);
      for (int a = 0; a < n; ++a) s[a] = r.segment(a * N, N).sum();
      const Eigen::VectorXd c = B0inv * s;
      for (int a = 0; a < n; ++a) out.segment(a * N, N).array() += c[a];
    }
    return out;
  };
  linalg::Op proj;
  if (flat)
    proj = [&](const Vec& x) {
      Vec y = x;
      for (int a = 0; a < n; ++a) y.segment(a * N, N).array() -= x.segment(a * N, N).mean();
      return y;
    };

  const Vec rhs = apply_G(flat_vec(manifold::divergence(g, h).data()));
  linalg::SolveReport rep;
  const Vec x = linalg::pcg(A, M, rhs, Vec::Zero(rhs.size()), rtol, 2000, &rep, proj);
  if (!rep.converged && rep.relative_residual > 1e3 * rtol)
    throw NumericalError(NumericalFailure::non_convergence,
                         "gauge_split: CG stalled at relative residual " + std::to_string(rep.relative_residual));

  GaugeSplit out{h, field_of<VectorField>(g.grid(), x), 0.0, 0.0, rep.iterations};
  const SymTensorField dX = manifold::divergence_adjoint(g, out.X);
  out.h0 -= dX;
  const VectorField dh0 = manifold::divergence(g, out.h0);
  out.div_residual = std::sqrt(std::max(0.0, manifold::inner(g, dh0, dh0)));
  out.orthogonality = manifold::inner(g, out.h0, dX);
  return out;
}

// ==== conformal operator ====

SymTensorField conformal_op(const MetricField& g, const ScalarField& u) {
  const ScalarField lap = manifold::laplace_beltrami(g, u);
  SymTensorField out = manifold::hessian(g, u);
  out *= -1.0;
  for (int s = 0; s < out.component_count(); ++s)
    for (std::size_t k = 0; k < out.nodes(); ++k) out(s, k) += lap[k] * g.g()(s, k);
  return out;
}

ScalarField conformal_adjoint(const MetricField& g, const SymTensorField& kt) {
  // C* k = Delta(tr k) - (1/mu)[D_i D_j(mu k^{ij}) + D_m(Gamma^m_ij mu k^{ij})]
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const auto gamma = manifold::christoffel(g);
  const SymTensorField up = manifold::raise(g, kt);
  ScalarField out = manifold::laplace_beltrami(g, manifold::trace(g, kt));
  std::vector<double> acc(N, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::vector<double> muk(N);
      for (std::size_t k = 0; k < N; ++k) muk[k] = g.sqrt_det()[k] * up.at(i, j, k);
      const auto d2 = T.second_derivative(muk, i, j);
      for (std::size_t k = 0; k < N; ++k) acc[k] += d2[k];
    }
  std::vector<std::vector<double>> flux(n, std::vector<double>(N, 0.0));
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (std::size_t k = 0; k < N; ++k) flux[m][k] += gamma(m, i, j, k) * g.sqrt_det()[k] * up.at(i, j, k);
  const auto dflux = T.divergence(flux);
  for (std::size_t k = 0; k < N; ++k) out[k] -= (acc[k] + dflux[k]) / g.sqrt_det()[k];
  return out;
}

// ==== splits at a flat metric ====

bool is_constant(const MetricField& g) {
  for (int s = 0; s < g.g().component_count(); ++s) {
    const auto c = g.g().component(s);
    const double ref = c[0];
    for (double v : c)
      if (std::abs(v - ref) > 1e-12 * (1.0 + std::abs(ref))) return false;
  }
  return true;
}

SymTensorField project_conformal(const MetricField& g, const SymTensorField& h, ScalarField* u_out) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  const fourier::Transform T(g.grid());
  const Vec w = flat_vec(g.weights());
  auto A = [&](const Vec& x) {
    const auto u = field_of<ScalarField>(g.grid(), x);
    return Vec(flat_vec(conformal_adjoint(g, conformal_op(g, u)).data()).cwiseProduct(w));
  };
  const Eigen::MatrixXd gi = mean_ginv(g);
  const double wbar = w.mean();
  auto M = [&](const Vec& r) {
    const auto out = T.multiply(std::span<const double>(r.data(), N), [&](const std::array<double, 3>& kw) {
      double k2 = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) k2 += kw[a] * gi(a, b) * kw[b];
      return k2 == 0.0 ? 0.0 : 1.0 / (wbar * (n - 1) * k2 * k2);
    });
    return flat_vec(out);
  };
  auto proj = [&](const Vec& x) -> Vec { return x.array() - x.mean(); };
  const Vec rhs = flat_vec(conformal_adjoint(g, h).data()).cwiseProduct(w);
  linalg::SolveReport rep;
  Vec x = linalg::pcg(A, M, rhs, Vec::Zero(N), 1e-13, 2000, &rep, proj);
  if (!rep.converged && rep.relative_residual > 1e-10)
    throw NumericalError(NumericalFailure::non_convergence, "project_conformal: CG stalled");
  // pin int u dV = 0 (C annihilates constants)
  x.array() -= x.dot(w) / w.sum();
  const auto u = field_of<ScalarField>(g.grid(), x);
  if (u_out) *u_out = u;
  return conformal_op(g, u);
}

TTSplit tt_split(const MetricField& g, const SymTensorField& h) {
  require_constant(g, "tt_split");
  require_divergence_free(g, h, "tt_split");

  const double c = manifold::inner(g, h, g.g()) / manifold::inner(g, g.g(), g.g());
  TTSplit out{c, c * g.g(), ScalarField(g.grid()), SymTensorField(g.grid()), SymTensorField(g.grid()),
              SymTensorField(g.grid())};
  const SymTensorField rest = h - out.scale_part;
  out.conformal_part = project_conformal(g, rest, &out.u);
  out.tt_part = rest - out.conformal_part;

  // K at a flat torus: constant trace-free tensors; project tt onto constants
  const auto basis = flat_family_basis(g);
  for (const auto& e : basis) out.kernel_part.axpy(manifold::inner(g, out.tt_part, e), e);
  const ScalarField tr_k = manifold::trace(g, out.kernel_part);
  const double n = g.dim();
  for (int s = 0; s < out.kernel_part.component_count(); ++s)
    for (std::size_t k = 0; k < out.kernel_part.nodes(); ++k) out.kernel_part(s, k) -= tr_k[k] / n * g.g()(s, k);

  const VectorField dtt = manifold::divergence(g, out.tt_part);
  out.div_tt = std::sqrt(std::max(0.0, manifold::inner(g, dtt, dtt)));
  const ScalarField trt = manifold::trace(g, out.tt_part);
  out.trace_tt = std::sqrt(std::max(0.0, manifold::inner(g, trt, trt)));
  const std::vector<const SymTensorField*> parts{&out.scale_part, &out.conformal_part, &out.tt_part};
  for (std::size_t a = 0; a < parts.size(); ++a)
    for (std::size_t b = a + 1; b < parts.size(); ++b) {
      const double na = norm2(g, *parts[a]), nb = norm2(g, *parts[b]);
      if (na > 0.0 && nb > 0.0)
        out.max_orthogonality =
            std::max(out.max_orthogonality, std::abs(manifold::inner(g, *parts[a], *parts[b])) / (na * nb));
    }
  return out;
}

Sector parse_sector(const std::string& name) {
  std::string s;
  for (char ch : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "all") return Sector::all;
  if (s == "ker_div" || s == "kerdiv") return Sector::ker_div;
  if (s == "tt") return Sector::tt;
  if (s == "conformal" || s == "im_c") return Sector::conformal;
  if (s == "scale") return Sector::scale;
  throw InvalidArgument("unknown sector '" + name + "' (expected all, ker_div, tt, conformal, scale)");
}

std::string to_string(Sector s) {
  switch (s) {
    case Sector::all: return "all";
    case Sector::ker_div: return "ker_div";
    case Sector::tt: return "tt";
    case Sector::conformal: return "conformal";
    case Sector::scale: return "scale";
  }
  return "?";
}

std::vector<SymTensorField> flat_family_basis(const MetricField& g) {
  const int sc = sym_count(g.dim());
  std::vector<SymTensorField> basis;
  for (int s = 0; s < sc; ++s) {
    SymTensorField e(g.grid());
    std::fill(e.component(s).begin(), e.component(s).end(), 1.0);
    // Gram-Schmidt in L^2(dV_g)
    for (const auto& b : basis) e.axpy(-manifold::inner(g, e, b), b);
    e *= 1.0 / norm2(g, e);
    basis.push_back(std::move(e));
  }
  return basis;
}

SymTensorField project_normal(const MetricField& g, const SymTensorField& h) {
  require_constant(g, "project_normal");
  require_divergence_free(g, h, "project_normal");
  SymTensorField out = h;
  for (const auto& e : flat_family_basis(g)) out.axpy(-manifold::inner(g, h, e), e);
  return out;
}

LichnerowiczSpectrum lichnerowicz_spectrum(const MetricField& g, Sector sector, int k) {
  require_constant(g, "lichnerowicz_spectrum");
  if (k < 1) throw InvalidArgument("lichnerowicz_spectrum: k must be positive");
  const int n = g.dim();
  const int sc = sym_count(n);
  const std::size_t N = g.grid().node_count();
  const PeriodicGrid& grid = g.grid();
  const fourier::Transform T(grid);

  // y = L^T h per node with L L^T the (constant) node Gram matrix, so that
  // the L^2(dV_g) pairing becomes Euclidean
  const Eigen::MatrixXd Q = g.weights()[0] * sym_gram(g.ginv().matrix(0));
  const Eigen::MatrixXd L = Q.llt().matrixL();
  const Eigen::MatrixXd Lt = L.transpose();
  const Eigen::MatrixXd Ltinv = Lt.inverse();
  auto to_y = [&](const SymTensorField& h) {
    Vec y(sc * N);
    for (std::size_t node = 0; node < N; ++node)
      for (int a = 0; a < sc; ++a) {
        double s = 0.0;
        for (int b = 0; b < sc; ++b) s += Lt(a, b) * h(b, node);
        y[a * N + node] = s;
      }
    return y;
  };
  auto from_y = [&](const Vec& y) {
    SymTensorField h(grid);
    for (std::size_t node = 0; node < N; ++node)
      for (int a = 0; a < sc; ++a) {
        double s = 0.0;
        for (int b = 0; b < sc; ++b) s += Ltinv(a, b) * y[b * N + node];
        h(a, node) = s;
      }
    return h;
  };

  auto p_scale = [&](const SymTensorField& h) {
    return (manifold::inner(g, h, g.g()) / manifold::inner(g, g.g(), g.g())) * g.g();
  };
  auto p_kerdiv = [&](const SymTensorField& h) { return gauge_split(g, h).h0; };
  auto p_conf = [&](const SymTensorField& h) { return project_conformal(g, h); };
  std::function<SymTensorField(const SymTensorField&)> P;
  switch (sector) {
    case Sector::all: break;
    case Sector::ker_div: P = p_kerdiv; break;
    case Sector::scale: P = p_scale; break;
    case Sector::conformal: P = p_conf; break;
    case Sector::tt:
      P = [&](const SymTensorField& h) {
        const SymTensorField h0 = p_kerdiv(h);
        return h0 - p_scale(h0) - p_conf(h0);
      };
      break;
  }
  linalg::Op proj;
  if (P) proj = [&](const Vec& y) { return to_y(P(from_y(y))); };
  auto A = [&](const Vec& y) { return Vec(-to_y(manifold::lichnerowicz(g, from_y(y)))); };
  const Eigen::MatrixXd gi = g.ginv().matrix(0);
  auto M = [&](const Vec& r) {
    Vec out(r.size());
    for (int a = 0; a < sc; ++a) {
      const auto c = T.multiply(std::span<const double>(r.data() + a * N, N), [&](const std::array<double, 3>& kw) {
        double k2 = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) k2 += kw[i] * gi(i, j) * kw[j];
        return 1.0 / (k2 + 1.0);
      });
      std::copy(c.begin(), c.end(), out.data() + a * N);
    }
    return out;
  };

  // Initial block: low Fourier modes in every component, projected into the
  // sector and reduced to the lowest Ritz vectors.
  const int width = k + 4;
  std::vector<std::pair<double, std::array<int, 3>>> modes;
  const int K = 3;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b)
      for (int c = (n == 3 ? -K : 0); c <= (n == 3 ? K : 0); ++c) {
        const std::array<int, 3> m{a, b, c};
        int first = 0;
        for (int i = 0; i < 3 && first == 0; ++i) first = m[i];
        if (first < 0) continue;
        double k2 = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            k2 += (2 * std::numbers::pi * m[i] / grid.period(i)) * gi(i, j) * (2 * std::numbers::pi * m[j] / grid.period(j));
        modes.push_back({k2, m});
      }
  std::stable_sort(modes.begin(), modes.end(), [](const auto& x, const auto& y) { return x.first < y.first - 1e-12; });
  std::vector<Vec> cols;
  const std::size_t max_cols = static_cast<std::size_t>(std::min<std::size_t>(sc * N, 6 * width + 2 * sc));
  for (const auto& [k2, m] : modes) {
    for (int part = 0; part < 2; ++part) {
      if (m == std::array<int, 3>{0, 0, 0} && part == 1) continue;
      for (int s = 0; s < sc; ++s) {
        SymTensorField e(grid);
        for (std::size_t node = 0; node < N; ++node) {
          double ph = 0.0;
          for (int i = 0; i < n; ++i) ph += 2 * std::numbers::pi * m[i] * grid.coordinate(node, i) / grid.period(i);
          e(s, node) = part == 0 ? std::cos(ph) : std::sin(ph);
        }
        cols.push_back(to_y(e));
      }
    }
    if (cols.size() >= max_cols) break;
  }
  Mat X0(static_cast<Eigen::Index>(sc * N), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) X0.col(j) = proj ? proj(cols[j]) : cols[j];
  Mat X = linalg::svqb(X0, 1e-16);
  LichnerowiczSpectrum out;
  if (X.cols() == 0) {
    out.sector_rank = 0;
    return out;
  }
  {
    Mat AX(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) AX.col(j) = A(X.col(j));
    Mat G = X.transpose() * AX;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.transpose()));
    X = X * es.eigenvectors().leftCols(std::min<Eigen::Index>(width, X.cols()));
  }
  linalg::LobpcgOptions lo;
  lo.nev = std::min<int>(k, static_cast<int>(X.cols()));
  lo.tol = 1e-10;
  lo.max_iter = 500;
  const auto res = linalg::lobpcg(A, M, X, lo, proj);
  if (!res.converged)
    throw NumericalError(NumericalFailure::non_convergence, "lichnerowicz_spectrum: LOBPCG did not converge");
  const int got = std::min<int>(k, static_cast<int>(res.values.size()));
  if (got < k) out.sector_rank = got;
  for (int j = got - 1; j >= 0; --j) {
    out.values.push_back(-res.values(j));
    out.modes.push_back(from_y(res.vectors.col(j)));
  }
  return out;
}

}  // namespace lambda_lab::decomp
