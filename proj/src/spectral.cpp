#include "lambda_lab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lambda_lab/detail/geometry.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/manifold.hpp"

namespace lambda_lab::spectral {

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

// ==== Schrodinger ====

Schrodinger::Schrodinger(const MetricField& g)
    : g_(g), T_(g.grid()), R_(manifold::scalar_curvature(g)) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  a_.assign(sym_count(n), std::vector<double>(N));
  inv_mu_.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double mu = g.sqrt_det()[k];
    inv_mu_[k] = 1.0 / mu;
    for (int s = 0; s < sym_count(n); ++s) a_[s][k] = mu * g.ginv()(s, k);
  }
  weights_ = to_vec(g.weights());
  sqrt_weights_ = weights_.cwiseSqrt();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto c = g.ginv().component(sym_index(n, i, j));
      double acc = 0.0;
      for (double v : c) acc += v;
      mean_ginv_(i, j) = acc / static_cast<double>(N);
    }
}

Vec Schrodinger::apply(const Vec& u) const {
  const int n = g_.dim();
  const std::size_t N = static_cast<std::size_t>(u.size());
  const auto du = T_.gradient(std::span<const double>(u.data(), N));
  std::vector<std::vector<double>> flux(n, std::vector<double>(N));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto& a = a_[sym_index(n, i, j)];
      for (std::size_t k = 0; k < N; ++k) flux[i][k] += a[k] * du[j][k];
    }
  const auto div = T_.divergence(flux);
  Vec out(u.size());
  for (std::size_t k = 0; k < N; ++k) out[k] = -4.0 * inv_mu_[k] * div[k] + R_[k] * u[k];
  return out;
}

CVec Schrodinger::apply(const CVec& u) const {
  const Vec re = apply(Vec(u.real()));
  const Vec im = apply(Vec(u.imag()));
  CVec out(u.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

ScalarField Schrodinger::apply(const ScalarField& u) const {
  return ScalarField(u.grid(), to_std(apply(to_vec(u.data()))));
}

Vec Schrodinger::apply_symmetric(const Vec& y) const {
  const Vec u = y.cwiseQuotient(sqrt_weights_);
  return apply(u).cwiseProduct(sqrt_weights_);
}

Eigen::MatrixXd Schrodinger::matrix() const {
  return linalg::dense_matrix([this](const Vec& u) { return apply(u); }, size());
}

double Schrodinger::model_symbol(const std::array<double, 3>& k) const {
  const int n = g_.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += k[i] * mean_ginv_(i, j) * k[j];
  return 4.0 * s;
}

// ==== jet expansion ====

SchrodingerJet::SchrodingerJet(const MetricField& g, const SymTensorField& h)
    : T_(g.grid()), n_(g.dim()) {
  const auto geo = detail::jet_geometry(g, h);
  const auto gamma = detail::christoffel(T_, geo);
  const auto rc = detail::ricci(T_, geo, gamma);
  const auto r = detail::scalar_curvature(geo, rc);
  const std::size_t N = geo.nodes;
  const int sc = sym_count(n_);
  a_.resize(sc);
  for (int s = 0; s < sc; ++s)
    for (int p = 0; p <= 3; ++p) a_[s][p].resize(N);
  for (int p = 0; p <= 3; ++p) {
    inv_mu_[p].resize(N);
    R_[p].resize(N);
  }
  for (std::size_t k = 0; k < N; ++k) {
    const Jet3 inv = reciprocal(geo.mu[k]);
    for (int p = 0; p <= 3; ++p) {
      inv_mu_[p][k] = inv.c[p];
      R_[p][k] = r[k].c[p];
    }
    for (int s = 0; s < sc; ++s) {
      const Jet3 a = geo.mu[k] * geo.ginv[s][k];
      for (int p = 0; p <= 3; ++p) a_[s][p][k] = a.c[p];
    }
  }
}

Vec SchrodingerJet::apply(int order, const Vec& u) const {
  if (order < 0 || order > 3) throw InvalidArgument("SchrodingerJet: order must be 0..3");
  const std::size_t N = static_cast<std::size_t>(u.size());
  const auto du = T_.gradient(std::span<const double>(u.data(), N));
  // Taylor coefficient `order` of (1/mu) D_i(mu g^{ij} D_j u)
  std::vector<double> lap(N, 0.0);
  for (int q = 0; q <= order; ++q) {
    std::vector<std::vector<double>> flux(n_, std::vector<double>(N, 0.0));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const auto& a = a_[sym_index(n_, i, j)][q];
        for (std::size_t k = 0; k < N; ++k) flux[i][k] += a[k] * du[j][k];
      }
    const auto div = T_.divergence(flux);
    const auto& im = inv_mu_[order - q];
    for (std::size_t k = 0; k < N; ++k) lap[k] += im[k] * div[k];
  }
  const double scale = factorial(order);
  Vec out(u.size());
  for (std::size_t k = 0; k < N; ++k) out[k] = scale * (-4.0 * lap[k] + R_[order][k] * u[k]);
  return out;
}

CVec SchrodingerJet::apply(int order, const CVec& u) const {
  CVec out(u.size());
  out.real() = apply(order, Vec(u.real()));
  out.imag() = apply(order, Vec(u.imag()));
  return out;
}

// ==== ground state ====

Vec SpectralData::w_vec() const { return to_vec(w.data()); }

namespace {

/// Low Fourier modes (cos, sin pairs) ordered by the model symbol.
linalg::Mat initial_block(const Schrodinger& H, int cols) {
  const PeriodicGrid& grid = H.metric().grid();
  const int n = grid.dim();
  const int K = 3;
  struct Mode {
    std::array<int, 3> m;
    double symbol;
  };
  std::vector<Mode> modes;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b)
      for (int c = (n == 3 ? -K : 0); c <= (n == 3 ? K : 0); ++c) {
        const std::array<int, 3> m{a, b, c};
        // keep one representative of each +-m pair
        int first = 0;
        for (int i = 0; i < 3 && first == 0; ++i) first = m[i];
        if (first < 0) continue;
        std::array<double, 3> k{};
        for (int i = 0; i < n; ++i) k[i] = 2.0 * std::numbers::pi * m[i] / grid.period(i);
        modes.push_back({m, H.model_symbol(k)});
      }
  std::stable_sort(modes.begin(), modes.end(),
                   [](const Mode& x, const Mode& y) { return x.symbol < y.symbol - 1e-12; });
  const std::size_t N = grid.node_count();
  linalg::Mat X(static_cast<Eigen::Index>(N), cols);
  int col = 0;
  for (const auto& md : modes) {
    for (int part = 0; part < 2 && col < cols; ++part) {
      const bool zero = md.m == std::array<int, 3>{0, 0, 0};
      if (zero && part == 1) continue;
      for (std::size_t k = 0; k < N; ++k) {
        double ph = 0.0;
        for (int i = 0; i < n; ++i) ph += 2.0 * std::numbers::pi * md.m[i] * grid.coordinate(k, i) / grid.period(i);
        X(static_cast<Eigen::Index>(k), col) = part == 0 ? std::cos(ph) : std::sin(ph);
      }
      ++col;
    }
    if (col >= cols) break;
  }
  return X.array().colwise() * H.sqrt_weights().array();
}

}  // namespace

double Schrodinger::energy(const Vec& u) const {
  const int n = g_.dim();
  const auto du = T_.gradient(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    double q = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) q += g_.ginv_at(i, j, k) * du[i][k] * du[j][k];
    acc += weights_[k] * (4.0 * q + R_[k] * u[k] * u[k]);
  }
  return acc;
}

SpectralData ground_state(const MetricField& g, int k, const SpectralOptions& opts) {
  if (k < 2) throw InvalidArgument("ground_state: need k >= 2");
  auto H = std::make_shared<const Schrodinger>(g);
  const Eigen::Index N = H->size();
  if (k > N) throw InvalidArgument("ground_state: k exceeds the number of nodes");
  SpectralData sd(H);

  Vec values;
  linalg::Mat vectors;  // symmetric coordinates y = B^{1/2} u
  if (opts.dense) {
    Eigen::MatrixXd M = H->matrix();
    M = H->sqrt_weights().asDiagonal() * M * H->sqrt_weights().cwiseInverse().asDiagonal();
    M = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    values = es.eigenvalues().head(k);
    vectors = es.eigenvectors().leftCols(k);
  } else {
    const int cols = static_cast<int>(std::min<Eigen::Index>(k + opts.guard, N));
    const fourier::Transform& T = H->transform();
    auto A = [&](const Vec& y) { return H->apply_symmetric(y); };
    auto P = [&](const Vec& r) {
      return to_vec(T.multiply(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())),
                               [&](const std::array<double, 3>& kk) { return 1.0 / (H->model_symbol(kk) + 1.0); }));
    };
    linalg::LobpcgOptions lo;
    lo.nev = k;
    lo.tol = opts.tol;
    lo.max_iter = opts.max_iter;
    const auto res = linalg::lobpcg(A, P, initial_block(*H, cols), lo);
    if (!res.converged || res.values.size() < k)
      throw NumericalError(NumericalFailure::non_convergence,
                           "ground_state: LOBPCG did not converge (" + std::to_string(res.iterations) +
                               " iterations)");
    values = res.values.head(k);
    vectors = res.vectors.leftCols(k);
    sd.iterations = res.iterations;
  }

  sd.lambda = values(0);
  sd.spectrum.assign(values.data(), values.data() + k);
  sd.gap = values(1) - values(0);
  sd.volume = g.volume();
  if (sd.gap < opts.min_gap)
    throw NumericalError(NumericalFailure::gap_collapse,
                         "ground_state: spectral gap " + std::to_string(sd.gap) + " below tolerance");

  for (int j = 0; j < k; ++j) {
    Vec u = vectors.col(j).cwiseQuotient(H->sqrt_weights());
    if (j == 0 && u.sum() < 0.0) u = -u;
    sd.modes.emplace_back(g.grid(), to_std(u));
  }
  sd.w = sd.modes[0];
  // Rayleigh quotient in energy form: the eigen-solver value carries the
  // round-off of the second-derivative symbol
  const Vec w0 = sd.w_vec();
  sd.lambda = H->energy(w0) / (H->weights().array() * w0.array().square()).sum();
  sd.spectrum[0] = sd.lambda;
  sd.gap = sd.spectrum[1] - sd.lambda;
  for (std::size_t i = 0; i < sd.w.nodes(); ++i) {
    if (!(sd.w[i] > 0.0))
      throw NumericalError(NumericalFailure::positivity_loss, "ground_state: w is not positive");
    sd.f[i] = -2.0 * std::log(sd.w[i]);
  }
  return sd;
}

double lambda(const MetricField& g, const SpectralOptions& opts) { return ground_state(g, 2, opts).lambda; }

double pair(const SpectralData& sd, const Vec& a, const Vec& b) {
  return (sd.weights().array() * a.array() * b.array()).sum();
}

Complex pair(const SpectralData& sd, const Vec& a, const CVec& b) {
  const Vec wa = sd.weights().cwiseProduct(a);
  return {wa.dot(b.real()), wa.dot(b.imag())};
}

// ==== resolvent calculus ====

CVec resolvent_solve(const SpectralData& sd, Complex z, const CVec& b, double rtol) {
  const double guard = 1e-8 * std::max(1.0, sd.gap);
  for (double ev : sd.spectrum)
    if (std::abs(z - ev) < guard)
      throw NumericalError(NumericalFailure::near_spectrum,
                           "resolvent_solve: z is within the conditioning guard of an eigenvalue");
  const Schrodinger& H = *sd.op;
  const Vec& sw = H.sqrt_weights();
  const fourier::Transform& T = H.transform();
  double rbar = 0.0;
  for (double r : H.potential().data()) rbar += r;
  rbar /= static_cast<double>(H.size());

  auto A = [&](const CVec& y) -> CVec {
    CVec u = y.cwiseQuotient(sw.cast<Complex>());
    CVec Hu = H.apply(u);
    return z * y - Hu.cwiseProduct(sw.cast<Complex>());
  };
  // constant-coefficient model (z - 4|k|^2 - Rbar)^{-1}, applied as two real symbols
  auto M = [&](const CVec& v) -> CVec {
    const std::size_t N = static_cast<std::size_t>(v.size());
    const Vec vr = v.real(), vi = v.imag();
    auto sr = [&](const std::array<double, 3>& k) { return (1.0 / (z - H.model_symbol(k) - rbar)).real(); };
    auto si = [&](const std::array<double, 3>& k) { return (1.0 / (z - H.model_symbol(k) - rbar)).imag(); };
    const auto a = T.multiply(std::span<const double>(vr.data(), N), sr);
    const auto bb = T.multiply(std::span<const double>(vi.data(), N), si);
    const auto c = T.multiply(std::span<const double>(vi.data(), N), sr);
    const auto d = T.multiply(std::span<const double>(vr.data(), N), si);
    CVec out(v.size());
    for (std::size_t k = 0; k < N; ++k) out[k] = Complex(a[k] - bb[k], c[k] + d[k]);
    return out;
  };
  const CVec rhs = b.cwiseProduct(sw.cast<Complex>());
  linalg::SolveReport rep;
  const CVec y = linalg::gmres(A, M, rhs, rtol, 60, 3000, &rep);
  if (!rep.converged)
    throw NumericalError(NumericalFailure::non_convergence,
                         "resolvent_solve: GMRES stalled at relative residual " +
                             std::to_string(rep.relative_residual));
  return y.cwiseQuotient(sw.cast<Complex>());
}

std::vector<Complex> contour_integrate(const SpectralData& sd,
                                       const std::function<std::vector<Complex>(Complex)>& F,
                                       const ContourOptions& opts) {
  const double r = opts.radius == 0.0 ? 0.25 * sd.gap : opts.radius;
  if (!(r > 0.0) || !(r < 0.5 * sd.gap))
    throw InvalidArgument("contour_integrate: radius must lie in (0, gap/2)");
  const int Nq = opts.points;
  if (Nq < 4) throw InvalidArgument("contour_integrate: need at least 4 quadrature points");
  // (1/2 pi i) int F dz with z = lambda + r e^{i theta}: (1/N) sum F(z_j) r e^{i theta_j}
  std::vector<Complex> acc;
  auto add = [&](const std::vector<Complex>& v, Complex e, double wgt, bool real_part) {
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Complex t = v[i] * e;
      acc[i] += real_part ? Complex(wgt * t.real(), 0.0) : wgt * t;
    }
  };
  if (opts.real_integrand && Nq % 2 == 0) {
    for (int j = 0; j <= Nq / 2; ++j) {
      const double th = 2.0 * std::numbers::pi * j / Nq;
      const Complex e = r * Complex(std::cos(th), std::sin(th));
      add(F(sd.lambda + e), e, (j == 0 || j == Nq / 2) ? 1.0 : 2.0, true);
    }
  } else {
    for (int j = 0; j < Nq; ++j) {
      const double th = 2.0 * std::numbers::pi * j / Nq;
      const Complex e = r * Complex(std::cos(th), std::sin(th));
      add(F(sd.lambda + e), e, 1.0, false);
    }
  }
  for (auto& a : acc) a /= static_cast<double>(Nq);
  return acc;
}

Complex contour_integrate(const SpectralData& sd, const std::function<Complex(Complex)>& F,
                          const ContourOptions& opts) {
  return contour_integrate(sd, std::function<std::vector<Complex>(Complex)>([&](Complex z) {
                             return std::vector<Complex>{F(z)};
                           }),
                           opts)[0];
}

Vec reduced_resolvent_apply(const SpectralData& sd, const Vec& b, double rtol) {
  const Schrodinger& H = *sd.op;
  const Vec& sw = H.sqrt_weights();
  const fourier::Transform& T = H.transform();
  const Vec what = sd.w_vec().cwiseProduct(sw);  // Euclidean unit vector
  auto proj = [&](const Vec& v) -> Vec { return v - what * what.dot(v); };
  const double lam = sd.lambda;
  auto A = [&](const Vec& y) -> Vec { return H.apply_symmetric(y) - lam * y; };
  const double shift = std::max(sd.gap, 1e-3);
  auto M = [&](const Vec& r) -> Vec {
    return to_vec(T.multiply(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())),
                             [&](const std::array<double, 3>& k) {
                               const double s = H.model_symbol(k);
                               return 1.0 / (s > 0.0 ? s : shift);
                             }));
  };
  const Vec rhs = -proj(b.cwiseProduct(sw));
  linalg::SolveReport rep;
  const Vec y = linalg::pcg(A, M, rhs, Vec::Zero(rhs.size()), rtol, 5000, &rep, proj);
  if (!rep.converged && rep.relative_residual > 100.0 * rtol)
    throw NumericalError(NumericalFailure::non_convergence,
                         "reduced_resolvent_apply: CG stalled at relative residual " +
                             std::to_string(rep.relative_residual));
  return proj(y).cwiseQuotient(sw);
}

ScalarField reduced_resolvent_apply(const SpectralData& sd, const ScalarField& b) {
  return ScalarField(b.grid(), to_std(reduced_resolvent_apply(sd, to_vec(b.data()))));
}

nlohmann::json summary_json(const SpectralData& sd) {
  return {{"lambda", sd.lambda}, {"spectrum", sd.spectrum}, {"gap", sd.gap}, {"vol", sd.volume}};
}

}  // namespace lambda_lab::spectral
