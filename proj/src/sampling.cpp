#include "lambda_lab/sampling.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include "lambda_lab/decomp.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/manifold.hpp"

namespace lambda_lab::sampling {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::size_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(std::uint64_t(stream) >> 32)};
  return std::mt19937_64(seq);
}

/// Modes m with |m_i| <= kmax, one representative per +-m pair.
std::vector<std::array<int, 3>> half_modes(int dim, int kmax, bool with_zero) {
  std::vector<std::array<int, 3>> out;
  const int k3 = dim == 3 ? kmax : 0;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b)
      for (int c = -k3; c <= k3; ++c) {
        const std::array<int, 3> m{a, b, c};
        int first = 0;
        for (int v : m)
          if (first == 0) first = v;
        if (first < 0 || (first == 0 && !with_zero)) continue;
        out.push_back(m);
      }
  return out;
}

PeriodicGrid reference_grid(const PeriodicGrid& grid) {
  std::vector<int> res(grid.dim(), 33);
  std::vector<double> periods;
  for (int a = 0; a < grid.dim(); ++a) periods.push_back(grid.period(a));
  return PeriodicGrid(res, periods);
}

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n, bool trace_free) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = nd(rng);
  if (trace_free) m -= (m.trace() / n) * Eigen::MatrixXd::Identity(n, n);
  return m;
}

/// Unit-C^2 building blocks of one sample on `grid`.
std::vector<SymTensorField> build_parts(const PeriodicGrid& grid, const SamplerOptions& opts, std::uint64_t seed,
                                        std::size_t index) {
  const auto flat = MetricField::flat(grid);
  std::vector<SymTensorField> parts;
  for (std::size_t j = 0; j < opts.kinds.size(); ++j) {
    const std::size_t stream = (index << 4) + j + 1;
    SymTensorField p(grid);
    switch (opts.kinds[j]) {
      case Kind::gauge: p = manifold::divergence_adjoint(flat, random_vector(grid, seed, stream, opts.kmax, opts.single_mode)); break;
      case Kind::conformal: p = decomp::conformal_op(flat, random_scalar(grid, seed, stream, opts.kmax, true, opts.single_mode)); break;
      case Kind::tt: {
        auto rng = make_rng(seed, stream);
        p = constant_tensor(grid, random_symmetric(rng, grid.dim(), true));
        break;
      }
      case Kind::flat: {
        auto rng = make_rng(seed, stream);
        p = constant_tensor(grid, random_symmetric(rng, grid.dim(), false));
        break;
      }
    }
    parts.push_back(std::move(p));
  }
  return parts;
}

}  // namespace

Kind parse_kind(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "gauge") return Kind::gauge;
  if (s == "conformal") return Kind::conformal;
  if (s == "tt") return Kind::tt;
  if (s == "flat") return Kind::flat;
  throw InvalidArgument("unknown perturbation kind '" + name + "' (expected gauge, conformal, tt, flat)");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::gauge: return "gauge";
    case Kind::conformal: return "conformal";
    case Kind::tt: return "tt";
    case Kind::flat: return "flat";
  }
  return "?";
}

ScalarField random_scalar(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax,
                          bool mean_zero, bool single) {
  auto rng = make_rng(seed, stream);
  std::normal_distribution<double> nd(0.0, 1.0);
  ScalarField u(grid);
  auto modes = half_modes(grid.dim(), kmax, !mean_zero);
  if (single) {
    std::uniform_int_distribution<std::size_t> pick(0, modes.size() - 1);
    modes = {modes[pick(rng)]};
  }
  for (const auto& m : modes) {
    double m2 = 0.0;
    for (int v : m) m2 += v * v;
    const double a = nd(rng) / (1.0 + m2), b = nd(rng) / (1.0 + m2);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
      double ph = 0.0;
      for (int i = 0; i < grid.dim(); ++i) ph += 2.0 * std::numbers::pi * m[i] * grid.coordinate(k, i) / grid.period(i);
      u[k] += a * std::cos(ph) + b * std::sin(ph);
    }
  }
  return u;
}

VectorField random_vector(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax, bool single) {
  VectorField X(grid);
  for (int a = 0; a < grid.dim(); ++a) {
    const auto u = random_scalar(grid, seed, stream * 8 + a, kmax, true, single);
    std::copy(u.data().begin(), u.data().end(), X.component(a).begin());
  }
  return X;
}

SymTensorField random_tensor(const PeriodicGrid& grid, std::uint64_t seed, std::size_t stream, int kmax) {
  SymTensorField h(grid);
  for (int s = 0; s < h.component_count(); ++s) {
    const auto u = random_scalar(grid, seed, stream * 8 + s, kmax, false);
    std::copy(u.data().begin(), u.data().end(), h.component(s).begin());
  }
  return h;
}

MetricField Sample::metric() const {
  SymTensorField g = k;
  for (int i = 0; i < g.dim(); ++i)
    for (std::size_t node = 0; node < g.nodes(); ++node) g.at(i, i, node) += 1.0;
  return MetricField(std::move(g));
}

Sample draw(const PeriodicGrid& grid, const SamplerOptions& opts, std::uint64_t seed, std::size_t index) {
  if (opts.kinds.empty()) throw InvalidArgument("sampler: no perturbation kinds selected");
  if (!(opts.radius > 0.0) || !(opts.min_scale > 0.0) || opts.min_scale > 1.0)
    throw InvalidArgument("sampler: radius must be positive and min_scale in (0, 1]");

  auto rng = make_rng(seed, index << 4);
  std::uniform_real_distribution<double> weight(0.2, 1.0), scale(opts.min_scale, 1.0);
  std::vector<double> c(opts.kinds.size());
  for (auto& v : c) v = weight(rng);
  const double target = opts.radius * scale(rng);

  // mixing weights and normalization are fixed on the reference grid
  const PeriodicGrid ref = reference_grid(grid);
  const auto flat_ref = MetricField::flat(ref);
  const auto ref_parts = build_parts(ref, opts, seed, index);
  std::vector<double> unit(ref_parts.size());
  SymTensorField k_ref(ref);
  for (std::size_t j = 0; j < ref_parts.size(); ++j) {
    const double nrm = manifold::norm(flat_ref, ref_parts[j], manifold::NormKind::c2);
    unit[j] = nrm > 0.0 ? c[j] / nrm : 0.0;
    k_ref.axpy(unit[j], ref_parts[j]);
  }
  const double total = manifold::norm(flat_ref, k_ref, manifold::NormKind::c2);
  const double s = total > 0.0 ? target / total : 0.0;

  Sample out{seed, index, SymTensorField(grid), {}, opts.kinds, total * s};
  auto parts = build_parts(grid, opts, seed, index);
  for (std::size_t j = 0; j < parts.size(); ++j) {
    parts[j] *= unit[j] * s;
    out.k += parts[j];
  }
  out.parts = std::move(parts);
  return out;
}

}  // namespace lambda_lab::sampling
