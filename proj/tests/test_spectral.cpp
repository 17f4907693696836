#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lambda_lab/error.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/snapshot.hpp"
#include "lambda_lab/spectral.hpp"
#include "test_util.hpp"

using namespace lambda_lab;
using namespace lambda_lab::spectral;

namespace {

const double kPi = std::numbers::pi;

Vec vec_of(const ScalarField& u) { return Eigen::Map<const Vec>(u.data().data(), u.data().size()); }

MetricField random_metric(int res, unsigned seed, double amp = 0.05) {
  std::mt19937_64 rng(seed);
  return test_util::smooth_metric(PeriodicGrid::cube(2, res), rng, amp);
}

/// Dense eigendecomposition oracle in the weighted inner product.
struct DenseOracle {
  Eigen::VectorXd values;
  Eigen::MatrixXd modes;  // columns are L^2(dV)-orthonormal eigenfunctions

  explicit DenseOracle(const Schrodinger& H) {
    const Vec& s = H.sqrt_weights();
    Eigen::MatrixXd M = s.asDiagonal() * H.matrix() * s.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    values = es.eigenvalues();
    modes = s.cwiseInverse().asDiagonal() * es.eigenvectors();
  }

  Vec reduced_resolvent(const Vec& b, const Vec& weights) const {
    Vec out = Vec::Zero(b.size());
    for (Eigen::Index k = 1; k < values.size(); ++k) {
      const double c = (weights.array() * modes.col(k).array() * b.array()).sum();
      out += modes.col(k) * (c / (values(0) - values(k)));
    }
    return out;
  }
};

}  // namespace

TEST_CASE("Schrodinger operator basics") {
  const auto grid = PeriodicGrid::cube(2, 17);
  SUBCASE("flat and constant metrics annihilate constants") {
    for (double c : {1.0, 3.0}) {
      const Schrodinger H(MetricField::constant(grid, c * Eigen::MatrixXd::Identity(2, 2)));
      CHECK(H.apply(Vec(Vec::Ones(H.size()))).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("H 1 = R") {
    const auto g = random_metric(17, 3);
    const Schrodinger H(g);
    const Vec one = Vec::Ones(H.size());
    CHECK((H.apply(one) - vec_of(H.potential())).cwiseAbs().maxCoeff() < 1e-11);
  }
  SUBCASE("self-adjoint in L2(dV_g)") {
    const auto g = random_metric(17, 4);
    const Schrodinger H(g);
    std::mt19937_64 rng(11);
    const Vec u = vec_of(test_util::smooth_scalar(grid, rng, 1.0, 4));
    const Vec v = vec_of(test_util::smooth_scalar(grid, rng, 1.0, 4));
    const Vec& w = H.weights();
    const double a = (w.array() * u.array() * H.apply(v).array()).sum();
    const double b = (w.array() * H.apply(u).array() * v.array()).sum();
    CHECK(std::abs(a - b) < 1e-12 * (std::abs(a) + 1.0));
  }
  SUBCASE("Fourier mode eigenvalues at flat") {
    const Schrodinger H(MetricField::flat(grid));
    const Vec u = vec_of(sample(grid, [](auto x) { return std::cos(2.0 * x[0] - x[1]); }));
    CHECK((H.apply(u) - 20.0 * u).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("jet expansion of H along a line") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto g = random_metric(17, 5);
  std::mt19937_64 rng(6);
  const auto h = test_util::smooth_tensor(grid, rng, 0.3);
  const Vec u = vec_of(test_util::smooth_scalar(grid, rng, 1.0, 3));
  const SchrodingerJet J(g, h);
  CHECK((J.apply(0, u) - Schrodinger(g).apply(u)).cwiseAbs().maxCoeff() < 1e-10);

  // five-point centered differences of the assembled operators
  auto H_at = [&](double e) {
    SymTensorField ge = g.g();
    ge.axpy(e, h);
    return Schrodinger(MetricField(ge)).apply(u);
  };
  const double e = 1e-3;
  const Vec p1 = H_at(e), m1 = H_at(-e), p2 = H_at(2 * e), m2 = H_at(-2 * e), z0 = H_at(0.0);
  const Vec d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * e);
  const Vec d2 = (-(p2 + m2) + 16.0 * (p1 + m1) - 30.0 * z0) / (12.0 * e * e);
  const Vec d3 = ((p2 - m2) - 2.0 * (p1 - m1)) / (2.0 * e * e * e);
  const Vec j1 = J.apply(1, u), j2 = J.apply(2, u), j3 = J.apply(3, u);
  CHECK((d1 - j1).cwiseAbs().maxCoeff() < 1e-7 * j1.cwiseAbs().maxCoeff());
  CHECK((d2 - j2).cwiseAbs().maxCoeff() < 1e-5 * j2.cwiseAbs().maxCoeff());
  CHECK((d3 - j3).cwiseAbs().maxCoeff() < 1e-3 * j3.cwiseAbs().maxCoeff());
  // homogeneity: the k-th coefficient scales as s^k
  const SchrodingerJet J2(g, 2.0 * h);
  CHECK((J2.apply(3, u) - 8.0 * j3).cwiseAbs().maxCoeff() < 1e-9 * j3.cwiseAbs().maxCoeff());
}

TEST_CASE("ground state at the flat torus") {
  const auto grid = PeriodicGrid::cube(2, 33);
  const auto sd = ground_state(MetricField::flat(grid), 4);
  CHECK(std::abs(sd.lambda) < 1e-10);
  double werr = 0.0, ferr = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    werr = std::max(werr, std::abs(sd.w[k] - 1.0 / (2.0 * kPi)));
    ferr = std::max(ferr, std::abs(sd.f[k] - std::log(4.0 * kPi * kPi)));
  }
  CHECK(werr < 1e-10);
  CHECK(ferr < 1e-9);
  CHECK(sd.gap == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(sd.volume == doctest::Approx(4.0 * kPi * kPi));
  CHECK(sd.spectrum.size() == 4u);
  const auto js = summary_json(sd);
  CHECK(js.contains("lambda"));
  CHECK(js.contains("spectrum"));
  CHECK(js.contains("gap"));
  CHECK(js.contains("vol"));
}

TEST_CASE("ground state matches the dense oracle") {
  for (unsigned seed : {21u, 22u}) {
    const auto g = random_metric(17, seed);
    const auto sd = ground_state(g, 4);
    const DenseOracle D(*sd.op);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(sd.spectrum[j] - D.values(j)) < 1e-9);
    Vec w0 = D.modes.col(0);
    if (w0.sum() < 0) w0 = -w0;
    CHECK((sd.w_vec() - w0).cwiseAbs().maxCoeff() < 1e-8);
    const auto dense = ground_state(g, 4, SpectralOptions{.dense = true});
    CHECK(std::abs(dense.lambda - sd.lambda) < 1e-11);
    // normalization and positivity invariants
    CHECK(pair(sd, sd.w_vec(), sd.w_vec()) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sd.w.data() == sd.modes[0].data());
    double ef = 0.0;
    for (std::size_t k = 0; k < sd.f.nodes(); ++k) ef += std::exp(-sd.f[k]) * sd.weights()[k];
    CHECK(ef == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sd.lambda < 0.0);
  }
}

TEST_CASE("lambda symmetries") {
  const auto g = random_metric(17, 31);
  const double lam = ground_state(g).lambda;
  SUBCASE("scaling lambda(c g) = lambda(g) / c") {
    for (double c : {0.5, 2.0, 3.0}) {
      SymTensorField gc = g.g();
      gc *= c;
      CHECK(ground_state(MetricField(gc)).lambda == doctest::Approx(lam / c).epsilon(1e-8));
    }
  }
  SUBCASE("invariance under lattice translations") {
    const auto& grid = g.grid();
    SymTensorField gs(grid);
    for (int s = 0; s < gs.component_count(); ++s)
      for (std::size_t k = 0; k < grid.node_count(); ++k) gs(s, grid.shifted(k, {3, -5, 0})) = g.g()(s, k);
    CHECK(std::abs(ground_state(MetricField(gs)).lambda - lam) < 1e-12);
  }
  SUBCASE("continuity along a line") {
    std::mt19937_64 rng(2);
    const auto h = test_util::smooth_tensor(g.grid(), rng, 0.05);
    double prev = 1.0;
    for (double e : {1e-2, 1e-3, 1e-4}) {
      SymTensorField ge = g.g();
      ge.axpy(e, h);
      const double d = std::abs(ground_state(MetricField(ge)).lambda - lam);
      CHECK(d < prev);
      prev = d;
    }
    CHECK(prev < 1e-5);
  }
}

TEST_CASE("variational characterization of lambda") {
  const auto g = MetricField::conformal(
      sample(PeriodicGrid::cube(2, 33), [](auto x) { return 0.1 * std::sin(x[0]) + 0.05 * std::cos(x[1]); }));
  const auto sd = ground_state(g);
  const auto curv = manifold::scalar_curvature(g);
  auto functional = [&](const ScalarField& f) {
    const auto df = manifold::differential(f);
    ScalarField integrand(g.grid()), ef(g.grid());
    for (std::size_t k = 0; k < f.nodes(); ++k) {
      double grad2 = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) grad2 += g.ginv_at(i, j, k) * df(i, k) * df(j, k);
      integrand[k] = (curv[k] + grad2) * std::exp(-f[k]);
      ef[k] = std::exp(-f[k]);
    }
    return manifold::integrate(g, integrand) / manifold::integrate(g, ef);
  };
  CHECK(functional(sd.f) == doctest::Approx(sd.lambda).epsilon(1e-8));
  CHECK(sd.lambda < 0.0);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    ScalarField fc = sd.f + test_util::smooth_scalar(g.grid(), rng, 0.2, 3);
    // normalize so that int e^{-f} dV = 1
    ScalarField ef(g.grid());
    for (std::size_t k = 0; k < fc.nodes(); ++k) ef[k] = std::exp(-fc[k]);
    const double shift = std::log(manifold::integrate(g, ef));
    for (std::size_t k = 0; k < fc.nodes(); ++k) fc[k] += shift;
    CHECK(functional(fc) >= sd.lambda);
  }
}

TEST_CASE("ground state failure modes") {
  const auto grid = PeriodicGrid::cube(2, 17);
  CHECK_THROWS_AS(ground_state(MetricField::flat(grid), 1), InvalidArgument);
  SpectralOptions tight;
  tight.max_iter = 1;
  tight.tol = 1e-15;
  CHECK_THROWS_AS(ground_state(random_metric(17, 9), 4, tight), NumericalError);
  try {
    // the first excited level of a square flat torus is four-fold, so asking
    // for a gap above it reports collapse
    SpectralOptions o;
    o.min_gap = 5.0;
    ground_state(MetricField::flat(grid), 4, o);
    FAIL("expected gap collapse");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == NumericalFailure::gap_collapse);
  }
}

TEST_CASE("resolvent solves") {
  const auto g = random_metric(17, 41);
  const auto sd = ground_state(g, 4);
  const Complex z = sd.lambda + 0.25 * sd.gap * Complex(std::cos(1.0), std::sin(1.0));
  SUBCASE("eigenvectors") {
    for (int j : {0, 1}) {
      const Vec u = vec_of(sd.modes[j]);
      const CVec x = resolvent_solve(sd, z, u.cast<Complex>());
      const CVec ref = u.cast<Complex>() / (z - sd.spectrum[j]);
      CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-9 * ref.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("random right-hand side") {
    std::mt19937_64 rng(5);
    const Vec b = vec_of(test_util::smooth_scalar(g.grid(), rng, 1.0, 5));
    const CVec x = resolvent_solve(sd, z, b.cast<Complex>());
    const CVec r = z * x - sd.op->apply(x) - b.cast<Complex>();
    CHECK(r.norm() / b.norm() <= 1e-10);
  }
  SUBCASE("near-spectrum guard") {
    try {
      resolvent_solve(sd, sd.spectrum[1] + 1e-12, Vec::Ones(sd.op->size()).cast<Complex>());
      FAIL("expected near-spectrum error");
    } catch (const NumericalError& e) {
      CHECK(e.kind() == NumericalFailure::near_spectrum);
    }
  }
}

TEST_CASE("contour quadrature") {
  const auto g = random_metric(17, 51);
  const auto sd = ground_state(g, 4);
  const double lam = sd.lambda;
  SUBCASE("residue calculus") {
    CHECK(std::abs(contour_integrate(sd, [&](Complex z) { return 1.0 / (z - lam); }) - 1.0) < 1e-14);
    CHECK(std::abs(contour_integrate(sd, [&](Complex z) { return 1.0 / ((z - lam) * (z - lam)); })) < 1e-12);
    ContourOptions full;
    full.real_integrand = false;
    CHECK(std::abs(contour_integrate(sd, [&](Complex z) { return 1.0 / (z - lam); }, full) - 1.0) < 1e-14);
  }
  SUBCASE("radius must stay inside the safe annulus") {
    ContourOptions bad;
    bad.radius = 0.6 * sd.gap;
    CHECK_THROWS_AS(contour_integrate(sd, [](Complex) { return Complex(1.0); }, bad), InvalidArgument);
    bad.radius = -1.0;
    CHECK_THROWS_AS(contour_integrate(sd, [](Complex) { return Complex(1.0); }, bad), InvalidArgument);
  }
  SUBCASE("projector reproduces w") {
    std::mt19937_64 rng(8);
    const Vec v = vec_of(test_util::smooth_scalar(g.grid(), rng, 1.0, 3));
    const Vec w = sd.w_vec();
    const Complex pw = contour_integrate(
        sd, [&](Complex z) { return pair(sd, v, resolvent_solve(sd, z, w.cast<Complex>())); });
    CHECK(std::abs(pw - pair(sd, v, w)) < 1e-10 * v.norm());
  }
}

TEST_CASE("reduced resolvent") {
  const auto g = random_metric(17, 61);
  const auto sd = ground_state(g, 4);
  const DenseOracle D(*sd.op);
  const Vec w = sd.w_vec();
  CHECK(reduced_resolvent_apply(sd, w).cwiseAbs().maxCoeff() < 1e-10);
  const Vec u2 = vec_of(sd.modes[1]);
  CHECK((reduced_resolvent_apply(sd, u2) - u2 / (sd.lambda - sd.spectrum[1])).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937_64 rng(9);
  const Vec b = vec_of(test_util::smooth_scalar(g.grid(), rng, 1.0, 4));
  const Vec Sb = reduced_resolvent_apply(sd, b);
  CHECK(std::abs(pair(sd, w, Sb)) < 1e-12 * Sb.norm());
  const Vec ref = D.reduced_resolvent(b, sd.weights());
  CHECK((Sb - ref).norm() < 1e-9 * ref.norm());

  // contour form: (1/2 pi i) oint <v, R(z)(b - <w,b>w)> dz / (z - lambda)
  const Vec v = vec_of(test_util::smooth_scalar(g.grid(), rng, 1.0, 4));
  const Vec bp = b - pair(sd, w, b) * w;
  const Complex c = contour_integrate(sd, [&](Complex z) {
    return pair(sd, v, resolvent_solve(sd, z, bp.cast<Complex>())) / (z - sd.lambda);
  });
  const double direct = pair(sd, v, Sb);
  CHECK(std::abs(c.real() - direct) <= 1e-8 * std::abs(direct));
  CHECK(std::abs(c.imag()) < 1e-14);
}

TEST_CASE("LFLD snapshots round-trip") {
  const auto g = random_metric(9, 71);
  const auto dir = std::filesystem::temp_directory_path() / "lambda_lab_test_snapshot";
  std::filesystem::create_directories(dir);
  snapshot::write(dir / "g.lfld", g.g());
  const auto back = snapshot::read_metric(dir / "g.lfld");
  CHECK(back.g().data() == g.g().data());
  CHECK(back.grid() == g.grid());
  const ScalarField u = sample(g.grid(), [](auto x) { return x[0] * x[1]; });
  snapshot::write(dir / "u.lfld", u);
  CHECK(snapshot::read_scalar(dir / "u.lfld").data() == u.data());
  CHECK_THROWS_AS(snapshot::read_tensor(dir / "u.lfld"), InvalidArgument);
  {
    std::ofstream bad(dir / "bad.lfld", std::ios::binary);
    bad << "LFLDxx";
  }
  CHECK_THROWS_AS(snapshot::read(dir / "bad.lfld"), InvalidArgument);
  std::filesystem::remove_all(dir);
}
