#include "lambda_lab/variation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "lambda_lab/decomp.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/fourier.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/parallel.hpp"

namespace lambda_lab::variation {

using spectral::Complex;
using spectral::CVec;
using spectral::Vec;

namespace {

Vec to_vec(const ScalarField& u) { return Eigen::Map<const Vec>(u.data().data(), static_cast<Eigen::Index>(u.nodes())); }

ScalarField to_field(const PeriodicGrid& grid, const Vec& v) {
  return ScalarField(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

/// g^{ij} X_i Y_j per node.
ScalarField covector_inner(const MetricField& g, const VectorField& X, const VectorField& Y) {
  ScalarField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k)
    for (int i = 0; i < g.dim(); ++i)
      for (int j = 0; j < g.dim(); ++j) out[k] += g.ginv_at(i, j, k) * X(i, k) * Y(j, k);
  return out;
}

/// (1/mu) D_i(mu g^{ij} X_j).
ScalarField covector_divergence(const MetricField& g, const VectorField& X) {
  const int n = g.dim();
  const std::size_t N = g.grid().node_count();
  std::vector<std::vector<double>> flux(n, std::vector<double>(N, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (std::size_t k = 0; k < N; ++k) flux[i][k] += g.sqrt_det()[k] * g.ginv_at(i, j, k) * X(j, k);
  const auto d = fourier::Transform(g.grid()).divergence(flux);
  ScalarField out(g.grid());
  for (std::size_t k = 0; k < N; ++k) out[k] = d[k] / g.sqrt_det()[k];
  return out;
}

MetricField shifted(const MetricField& g, const SymTensorField& h, double e) {
  return MetricField(g.g() + e * h);
}

void require_flat(const MetricField& g, const char* what) {
  if (manifold::ricci(g).max_abs() > 1e-8) throw InvalidArgument(std::string(what) + ": metric is not Ricci-flat");
}

void require_divergence_free(const MetricField& g, const SymTensorField& h, const char* what) {
  const VectorField d = manifold::divergence(g, h);
  const double dn = std::sqrt(std::max(0.0, manifold::inner(g, d, d)));
  if (dn > 1e-6 * manifold::norm(g, h, manifold::NormKind::h1) + 1e-12)
    throw InvalidArgument(std::string(what) + ": h is not divergence-free");
}

double sqrt_pos(double x) { return std::sqrt(std::max(0.0, x)); }

}  // namespace

// ==== first-order operator variations ====

ScalarField h_prime_apply(const MetricField& g, const SymTensorField& h, const ScalarField& u) {
  const VectorField du = manifold::differential(u);
  const VectorField div_h = manifold::divergence(g, h);
  const ScalarField tr_h = manifold::trace(g, h);
  const ScalarField hess = manifold::pointwise_inner(g, h, manifold::hessian(g, u));
  const ScalarField a = covector_inner(g, div_h, du);
  const ScalarField b = covector_inner(g, manifold::differential(tr_h), du);
  const ScalarField divdiv = covector_divergence(g, div_h);
  const ScalarField lap_tr = manifold::laplace_beltrami(g, tr_h);
  const ScalarField hrc = manifold::pointwise_inner(g, h, manifold::ricci(g));
  ScalarField out(g.grid());
  for (std::size_t k = 0; k < out.nodes(); ++k)
    out[k] = 4.0 * hess[k] + 4.0 * a[k] - 2.0 * b[k] + (divdiv[k] - lap_tr[k] - hrc[k]) * u[k];
  return out;
}

ScalarField h_derivative_apply(const MetricField& g, const SymTensorField& h, int k, const ScalarField& u) {
  if (k < 0 || k > 3) throw InvalidArgument("h_derivative_apply: order must be 0..3");
  const spectral::SchrodingerJet J(g, h);
  return to_field(g.grid(), J.apply(k, to_vec(u)));
}

ScalarField h_derivative_stencil(const MetricField& g, const SymTensorField& h, int k, const ScalarField& u,
                                 double step) {
  if (k < 1 || k > 3) throw InvalidArgument("h_derivative_stencil: order must be 1..3");
  const Vec x = to_vec(u);
  auto Hu = [&](double e) { return spectral::Schrodinger(shifted(g, h, e)).apply(x); };
  const double e = step;
  Vec out;
  switch (k) {
    case 1: out = (-Hu(2 * e) + 8.0 * Hu(e) - 8.0 * Hu(-e) + Hu(-2 * e)) / (12.0 * e); break;
    case 2:
      out = (-Hu(2 * e) + 16.0 * Hu(e) - 30.0 * Hu(0.0) + 16.0 * Hu(-e) - Hu(-2 * e)) / (12.0 * e * e);
      break;
    default: out = (Hu(2 * e) - 2.0 * Hu(e) + 2.0 * Hu(-e) - Hu(-2 * e)) / (2.0 * e * e * e); break;
  }
  return to_field(g.grid(), out);
}

SymmetryResidual h_prime_symmetry(const MetricField& g, const SymTensorField& h, const ScalarField& u,
                                  const ScalarField& v) {
  const spectral::Schrodinger H(g);
  const auto tr = to_vec(manifold::trace(g, h));
  const Vec x = to_vec(u), y = to_vec(v);
  const Vec hx = to_vec(h_derivative_apply(g, h, 1, u)), hy = to_vec(h_derivative_apply(g, h, 1, v));
  const Vec cx = hx + 0.5 * tr.cwiseProduct(H.apply(x)), cy = hy + 0.5 * tr.cwiseProduct(H.apply(y));
  const auto mu = g.weights();
  const Vec w = Eigen::Map<const Vec>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  auto pair = [&](const Vec& a, const Vec& b) { return (w.array() * a.array() * b.array()).sum(); };
  auto relres = [](double l, double r) {
    const double s = std::abs(l) + std::abs(r);
    return s > 0.0 ? std::abs(l - r) / s : 0.0;
  };
  return {relres(pair(x, hy), pair(hx, y)), relres(pair(x, cy), pair(cx, y))};
}

// ==== perturbation series ====

SeriesTerms series_terms(const SpectralData& sd, const SymTensorField& h, int order) {
  const spectral::SchrodingerJet J(sd.metric(), h);
  const Vec w = sd.w_vec();
  auto S = [&](const Vec& b) { return spectral::reduced_resolvent_apply(sd, b); };
  auto P = [&](const Vec& b) { return spectral::pair(sd, w, b); };
  SeriesTerms t;
  const Vec h1w = J.apply(1, w);
  t.h1 = P(h1w);
  if (order < 2) return t;
  const Vec h2w = J.apply(2, w);
  t.h2 = P(h2w);
  const Vec s1 = S(h1w);
  t.s11 = P(J.apply(1, s1));
  if (order < 3) return t;
  t.h3 = P(J.apply(3, w));
  t.s111 = P(J.apply(1, S(J.apply(1, s1))));
  t.ss11 = P(J.apply(1, S(s1)));
  t.s12 = P(J.apply(1, S(h2w)));
  t.s21 = P(J.apply(2, s1));
  return t;
}

ContourTerms contour_terms(const SpectralData& sd, const SymTensorField& h, const spectral::ContourOptions& opts) {
  const spectral::SchrodingerJet J(sd.metric(), h);
  const Vec w = sd.w_vec();
  const Vec h1w = J.apply(1, w);
  const Vec h2w = J.apply(2, w);
  const double a = spectral::pair(sd, w, h1w);
  const double lam = sd.lambda;
  auto F = [&](Complex z) {
    const Complex d = z - lam;
    const CVec r1 = spectral::resolvent_solve(sd, z, h1w.cast<Complex>());
    const CVec r2 = spectral::resolvent_solve(sd, z, h2w.cast<Complex>());
    const CVec r11 = spectral::resolvent_solve(sd, z, J.apply(1, r1));
    const Complex p11 = spectral::pair(sd, w, J.apply(1, r1));
    return std::vector<Complex>{
        2.0 * p11 / d,
        6.0 * spectral::pair(sd, w, J.apply(1, r11)) / d,
        3.0 * spectral::pair(sd, w, J.apply(1, r2)) / d,
        3.0 * spectral::pair(sd, w, J.apply(2, r1)) / d,
        -6.0 * a * p11 / (d * d),
    };
  };
  const auto v = spectral::contour_integrate(sd, std::function<std::vector<Complex>(Complex)>(F), opts);
  ContourTerms out;
  out.order2 = v[0].real();
  out.t2 = v[1].real();
  out.t3 = v[2].real();
  out.t4 = v[3].real();
  out.t5 = v[4].real();
  out.radius = opts.radius == 0.0 ? 0.25 * sd.gap : opts.radius;
  return out;
}

ContourTerms residue_terms(const SeriesTerms& s) {
  ContourTerms t;
  t.order2 = 2.0 * s.s11;
  t.t2 = 6.0 * (s.s111 - 2.0 * s.h1 * s.ss11);
  t.t3 = 3.0 * s.s12;
  t.t4 = 3.0 * s.s21;
  t.t5 = 6.0 * s.h1 * s.ss11;
  return t;
}

// ==== variations of lambda ====

std::string to_string(Method m) {
  switch (m) {
    case Method::perelman: return "perelman";
    case Method::series: return "perturbation-series";
    case Method::contour: return "contour";
    case Method::closed_form: return "closed-form-ricci-flat";
    case Method::finite_difference: return "finite-difference";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::perelman, Method::series, Method::contour, Method::closed_form, Method::finite_difference})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown variation method '" + name + "'");
}

VariationResult first_variation(const SpectralData& sd, const SymTensorField& h) {
  const GradientField G = gradient_field(sd);
  VariationResult r;
  r.order = 1;
  r.method = Method::perelman;
  r.value = -manifold::inner(sd.metric(), h, G.field, &G.f);
  r.reference = series_terms(sd, h, 1).first();
  r.cross_error = std::abs(r.value - r.reference);
  return r;
}

VariationResult second_variation(const SpectralData& sd, const SymTensorField& h) {
  const SeriesTerms s = series_terms(sd, h, 2);
  const ContourTerms c = contour_terms(sd, h);
  VariationResult r;
  r.order = 2;
  r.method = Method::series;
  r.value = s.second();
  r.reference = s.h2 + c.order2;
  r.cross_error = std::abs(r.value - r.reference);
  r.contour_radius = c.radius;
  return r;
}

VariationResult second_variation_ricci_flat(const MetricField& g, const SymTensorField& h) {
  require_flat(g, "second_variation_ricci_flat");
  require_divergence_free(g, h, "second_variation_ricci_flat");
  VariationResult r;
  r.order = 2;
  r.method = Method::closed_form;
  r.value = manifold::inner(g, h, manifold::lichnerowicz(g, h)) / (2.0 * g.volume());
  return r;
}

VariationResult third_variation(const SpectralData& sd, const SymTensorField& h) {
  const SeriesTerms s = series_terms(sd, h, 3);
  const ContourTerms c = contour_terms(sd, h);
  VariationResult r;
  r.order = 3;
  r.method = Method::series;
  r.value = s.third();
  r.reference = s.h3 + c.t2 + c.t3 + c.t4 + c.t5;
  r.cross_error = std::abs(r.value - r.reference);
  r.contour_radius = c.radius;
  return r;
}

FdOptions default_fd_options(int order) {
  FdOptions o;
  // the fourth-order stencil stays below eigenvalue round-off on the
  // default ladder; kept per order so that callers can tune it
  (void)order;
  return o;
}

VariationResult fd_variation(const MetricField& g, const SymTensorField& h, int order, const FdOptions& opts) {
  if (order < 1 || order > 3) throw InvalidArgument("fd_variation: order must be 1..3");
  if (opts.ladder.empty()) throw InvalidArgument("fd_variation: empty step ladder");
  std::map<double, double> cache;
  auto lam = [&](double e) {
    auto it = cache.find(e);
    if (it != cache.end()) return it->second;
    const double v = spectral::lambda(shifted(g, h, e), opts.spectral);
    cache.emplace(e, v);
    return v;
  };
  auto D = [&](double e) {
    switch (order) {
      case 1: return (lam(e) - lam(-e)) / (2.0 * e);
      case 2: return (lam(e) - 2.0 * lam(0.0) + lam(-e)) / (e * e);
      default: return (lam(2 * e) - 2.0 * lam(e) + 2.0 * lam(-e) - lam(-2 * e)) / (2.0 * e * e * e);
    }
  };
  // Neville extrapolation to e = 0 in the variable e^2
  const auto& L = opts.ladder;
  std::vector<double> T(L.size());
  for (std::size_t i = 0; i < L.size(); ++i) {
    T[i] = D(L[i]);
    for (std::size_t j = i; j-- > 0;) {
      const double q = (L[j] * L[j]) / (L[i] * L[i]);
      T[j] = T[j + 1] + (T[j + 1] - T[j]) / (q - 1.0);
    }
  }
  VariationResult r;
  r.order = order;
  r.method = Method::finite_difference;
  r.value = T[0];
  r.fd_step = *std::min_element(L.begin(), L.end());
  r.richardson_levels = static_cast<int>(L.size());
  return r;
}

std::vector<VariationResult> evaluate_all(const MetricField& g, const SymTensorField& h, const std::string& g_id,
                                          const std::string& h_id, std::uint64_t seed) {
  const auto sd = spectral::ground_state(g);
  const SeriesTerms s = series_terms(sd, h, 3);
  const ContourTerms c = contour_terms(sd, h);
  std::vector<VariationResult> rows;
  auto add = [&](int order, Method m, double value, double ref) {
    VariationResult r;
    r.order = order;
    r.method = m;
    r.value = value;
    r.reference = ref;
    r.cross_error = std::abs(value - ref);
    r.g_id = g_id;
    r.h_id = h_id;
    r.seed = seed;
    if (m == Method::contour) r.contour_radius = c.radius;
    rows.push_back(r);
  };
  std::array<VariationResult, 3> fd;
  for (int o = 1; o <= 3; ++o) fd[o - 1] = fd_variation(g, h, o, default_fd_options(o));

  const double perelman = first_variation(sd, h).value;
  add(1, Method::perelman, perelman, s.first());
  add(1, Method::series, s.first(), fd[0].value);
  add(2, Method::series, s.second(), fd[1].value);
  add(2, Method::contour, s.h2 + c.order2, s.second());
  const bool flat = manifold::ricci(g).max_abs() <= 1e-8;
  const VectorField d = manifold::divergence(g, h);
  if (flat && sqrt_pos(manifold::inner(g, d, d)) <= 1e-6 * manifold::norm(g, h, manifold::NormKind::h1) + 1e-12)
    add(2, Method::closed_form, second_variation_ricci_flat(g, h).value, s.second());
  add(3, Method::series, s.third(), fd[2].value);
  add(3, Method::contour, s.h3 + c.t2 + c.t3 + c.t4 + c.t5, s.third());
  for (int o = 1; o <= 3; ++o) {
    VariationResult r = fd[o - 1];
    r.reference = o == 1 ? s.first() : o == 2 ? s.second() : s.third();
    r.cross_error = std::abs(r.value - r.reference);
    r.g_id = g_id;
    r.h_id = h_id;
    r.seed = seed;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
  return rows;
}

void write_csv(std::ostream& os, const std::vector<VariationResult>& rows) {
  os << "order,method,value,cross_error,g_id,h_id,seed\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.order << ',' << to_string(r.method) << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.cross_error);
    os << buf << ',' << r.g_id << ',' << r.h_id << ',' << r.seed << '\n';
  }
}

// ==== gradient of lambda ====

GradientField gradient_field(const SpectralData& sd) {
  const MetricField& g = sd.metric();
  GradientField G{SymTensorField(g.grid()), manifold::ricci(g), manifold::hessian(g, sd.f), sd.f};
  G.field = G.ricci + G.hess_f;
  G.lambda = sd.lambda;
  G.orthogonality = manifold::inner(g, G.hess_f, G.field, &G.f);
  G.norm_f = sqrt_pos(manifold::inner(g, G.field, G.field, &G.f));
  G.ricci_norm_f = sqrt_pos(manifold::inner(g, G.ricci, G.ricci, &G.f));
  G.ricci_norm = sqrt_pos(manifold::inner(g, G.ricci, G.ricci));
  G.norm = sqrt_pos(manifold::inner(g, G.field, G.field));
  return G;
}

GradientField gradient_field(const MetricField& g) { return gradient_field(spectral::ground_state(g)); }

Linearization linearized_gradient(const MetricField& g, const SymTensorField& h) {
  if (!decomp::is_constant(g)) throw InvalidArgument("linearized_gradient: requires a flat (constant) metric");
  require_divergence_free(g, h, "linearized_gradient");
  Linearization L{manifold::lichnerowicz(g, h), manifold::trace(g, h)};
  L.gradient_rate *= -0.5;
  L.f_rate *= 0.5;
  return L;
}

TaylorRemainder taylor_remainder(const MetricField& g_rf, const MetricField& gbar, const SymTensorField& h) {
  if (!decomp::is_constant(g_rf) || !decomp::is_constant(gbar))
    throw InvalidArgument("taylor_remainder: g_RF and gbar must be constant metrics");
  require_divergence_free(g_rf, h, "taylor_remainder");
  const MetricField g(gbar.g() + h);
  SymTensorField R = gradient_field(g).field;
  R.axpy(0.5, manifold::lichnerowicz(g_rf, h));
  TaylorRemainder out;
  out.remainder = sqrt_pos(manifold::inner(g_rf, R, R));
  const double h2 = manifold::norm(g_rf, h, manifold::NormKind::h2);
  out.bound1 = manifold::norm(g_rf, h, manifold::NormKind::c2) * h2;
  out.bound2 = manifold::norm(g_rf, gbar.g() - g_rf.g(), manifold::NormKind::c2) * h2;
  return out;
}

// ==== scans ====

BoundScanReport third_variation_bound_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                           const std::vector<double>& ladder) {
  BoundScanReport rep;
  rep.rows.resize(samples);
  const sampling::SamplerOptions base;
  sampling::SamplerOptions dir;
  dir.radius = 1.0;
  dir.min_scale = 1.0;
  dir.kinds = {sampling::Kind::gauge, sampling::Kind::conformal, sampling::Kind::tt, sampling::Kind::flat};
  const auto flat = MetricField::flat(grid);
  parallel_for(samples, [&](std::size_t i) {
    // base point in the C^2 ball and a unit-C^2 direction h0
    const auto sd = spectral::ground_state(sampling::draw(grid, base, seed, 2 * i).metric());
    const auto h0 = sampling::draw(grid, dir, seed, 2 * i + 1).k;
    BoundScanRow row;
    row.index = i;
    for (double s : ladder) {
      const SymTensorField h = s * h0;
      const double d3 = series_terms(sd, h, 3).third();
      const double h1 = manifold::norm(flat, h, manifold::NormKind::h1);
      row.s.push_back(s);
      row.ratio.push_back(std::abs(d3) / (manifold::norm(flat, h, manifold::NormKind::c2) * h1 * h1));
    }
    const auto [mn, mx] = std::minmax_element(row.ratio.begin(), row.ratio.end());
    row.spread = *mn > 0.0 ? *mx / *mn : std::numeric_limits<double>::infinity();
    rep.rows[i] = std::move(row);
  });
  for (const auto& r : rep.rows) {
    rep.max_spread = std::max(rep.max_spread, r.spread);
    for (double v : r.ratio) rep.max_ratio = std::max(rep.max_ratio, v);
  }
  return rep;
}

SymTensorField normal_component(const MetricField& flat, const SymTensorField& k) {
  return decomp::project_normal(flat, decomp::gauge_split(flat, k).h0);
}

LambdaSignReport lambda_sign_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                  const sampling::SamplerOptions& opts, std::size_t flat_every) {
  LambdaSignReport rep;
  rep.rows.resize(samples);
  const auto flat = MetricField::flat(grid);
  sampling::SamplerOptions flat_opts = opts;
  flat_opts.kinds = {sampling::Kind::flat};
  parallel_for(samples, [&](std::size_t i) {
    LambdaSignRow row;
    row.index = i;
    row.flat_member = flat_every > 0 && i % flat_every == 0;
    const auto s = sampling::draw(grid, row.flat_member ? flat_opts : opts, seed, i);
    row.lambda = spectral::ground_state(s.metric()).lambda;
    row.normal_h1 = manifold::norm(flat, normal_component(flat, s.k), manifold::NormKind::h1);
    rep.rows[i] = row;
  });
  for (const auto& r : rep.rows) {
    rep.max_lambda = std::max(rep.max_lambda, r.lambda);
    if (r.flat_member && std::abs(r.lambda) > 1e-10) ++rep.flat_violations;
    if (!r.flat_member && r.normal_h1 > 1e-3 && r.lambda >= -1e-10) ++rep.strict_violations;
  }
  return rep;
}

}  // namespace lambda_lab::variation
