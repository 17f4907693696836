#include <cmath>
#include <random>

#include "doctest.h"
#include "lambda_lab/decomp.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/manifold.hpp"
#include "test_util.hpp"

using namespace lambda_lab;
using namespace lambda_lab::decomp;
using test_util::max_abs_diff;

namespace {

PeriodicGrid torus(int res = 33) { return PeriodicGrid::cube(2, res); }

double l2(const MetricField& g, const SymTensorField& h) { return std::sqrt(manifold::inner(g, h, h)); }
double l2(const MetricField& g, const VectorField& X) { return std::sqrt(manifold::inner(g, X, X)); }
double l2(const MetricField& g, const ScalarField& u) { return std::sqrt(manifold::inner(g, u, u)); }

SymTensorField constant_trace_free(const PeriodicGrid& grid, double a, double b) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, b, -a;
  return constant_tensor(grid, m);
}

ScalarField cos_x1(const PeriodicGrid& grid) {
  return sample(grid, [](auto x) { return std::cos(x[0]); });
}

/// Divergence-free random tensor: the h0 part of a smooth random tensor.
SymTensorField random_ker_div(const MetricField& g, std::mt19937_64& rng, int kmax = 3) {
  return gauge_split(g, test_util::smooth_tensor(g.grid(), rng, 1.0, kmax)).h0;
}

}  // namespace

// ==== gauge splitting ====

TEST_CASE("gauge split") {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  std::mt19937_64 rng(17);

  SUBCASE("constant tensors are already divergence free") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 0.3, 0.3, -0.5;
    const auto h = constant_tensor(grid, m);
    const auto s = gauge_split(flat, h);
    CHECK(s.X.max_abs() < 1e-12);
    CHECK(max_abs_diff(s.h0, h) < 1e-12);
  }
  SUBCASE("pure gauge tensors have no h0 part") {
    const auto X0 = test_util::smooth_vector(grid, rng, 1.0, 3);
    const auto h = manifold::divergence_adjoint(flat, X0);
    const auto s = gauge_split(flat, h);
    CHECK(l2(flat, s.h0) <= 1e-8 * l2(flat, h));
  }
  SUBCASE("random tensors at flat and curved metrics") {
    const auto curved = test_util::smooth_metric(grid, rng, 0.1);
    for (const MetricField* g : {&flat, &curved}) {
      CAPTURE(g == &curved);
      const auto h = test_util::smooth_tensor(grid, rng, 1.0, 4);
      const auto s = gauge_split(*g, h);
      const auto back = s.h0 + manifold::divergence_adjoint(*g, s.X);
      CHECK(max_abs_diff(back, h) < 1e-13 * (1.0 + h.max_abs()));
      CHECK(s.div_residual <= 1e-8 * manifold::norm(*g, h, manifold::NormKind::h1));
      CHECK(std::abs(s.orthogonality) <= 1e-8 * manifold::inner(*g, h, h));

      // idempotence
      const auto again = gauge_split(*g, s.h0);
      CHECK(l2(*g, again.X) < 1e-8 * l2(*g, h));
      CHECK(max_abs_diff(again.h0, s.h0) < 1e-8 * h.max_abs());
    }
  }
  SUBCASE("Killing fields are projected out at a flat metric") {
    const auto h = test_util::smooth_tensor(grid, rng, 1.0, 2);
    const auto s = gauge_split(flat, h);
    for (int a = 0; a < 2; ++a) {
      double mean = 0.0;
      for (double v : s.X.component(a)) mean += v;
      CHECK(std::abs(mean / grid.node_count()) < 1e-12);
    }
  }
}

// ==== conformal operator ====

TEST_CASE("conformal operator") {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  std::mt19937_64 rng(23);

  SUBCASE("constants are in the kernel") {
    CHECK(conformal_op(flat, sample(grid, [](auto) { return 2.5; })).max_abs() < 1e-13);
  }
  SUBCASE("u = cos x1 gives only (Cu)_22 = -cos x1") {
    const auto Cu = conformal_op(flat, cos_x1(grid));
    double err = 0.0;
    for (std::size_t k = 0; k < grid.node_count(); ++k)
      err = std::max({err, std::abs(Cu.at(1, 1, k) + std::cos(grid.coordinate(k, 0))), std::abs(Cu.at(0, 0, k)),
                      std::abs(Cu.at(0, 1, k))});
    CHECK(err < 1e-13);
  }
  SUBCASE("Cu is divergence free at the flat metric") {
    const auto u = test_util::smooth_scalar(grid, rng, 1.0, 4);
    const auto div = manifold::divergence(flat, conformal_op(flat, u));
    CHECK(l2(flat, div) <= 1e-6 * manifold::norm(flat, u, manifold::NormKind::h2));
  }
  SUBCASE("adjoint pairing to round-off") {
    const auto g = test_util::smooth_metric(grid, rng, 0.1);
    const auto u = test_util::smooth_scalar(grid, rng, 1.0, 4);
    const auto k = test_util::smooth_tensor(grid, rng, 1.0, 4);
    const double l = manifold::inner(g, conformal_op(g, u), k);
    const double r = manifold::inner(g, u, conformal_adjoint(g, k));
    CHECK(std::abs(l - r) < 1e-11 * (1.0 + std::abs(l)));
  }
}

// ==== splits at a flat metric ====

TEST_CASE("TT split") {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  std::mt19937_64 rng(31);

  SUBCASE("pure scale") {
    const auto s = tt_split(flat, 3.0 * flat.g());
    CHECK(std::abs(s.scale - 3.0) < 1e-12);
    CHECK(s.conformal_part.max_abs() < 1e-12);
    CHECK(s.tt_part.max_abs() < 1e-12);
  }
  SUBCASE("pure conformal mode") {
    const auto h = conformal_op(flat, cos_x1(grid));
    const auto s = tt_split(flat, h);
    CHECK(std::abs(s.scale) < 1e-14);
    CHECK(max_abs_diff(s.conformal_part, h) < 1e-10);
    CHECK(s.tt_part.max_abs() < 1e-10);
    CHECK(max_abs_diff(s.u, cos_x1(grid)) < 1e-10);
  }
  SUBCASE("constant trace-free tensors are TT and lie in K") {
    const auto h = constant_trace_free(grid, 0.4, -0.2);
    const auto s = tt_split(flat, h);
    CHECK(max_abs_diff(s.tt_part, h) < 1e-12);
    CHECK(max_abs_diff(s.kernel_part, h) < 1e-12);
    CHECK(manifold::lichnerowicz(flat, h).max_abs() < 1e-12);
  }
  SUBCASE("random divergence-free tensors") {
    for (int trial = 0; trial < 3; ++trial) {
      const auto h = random_ker_div(flat, rng);
      const auto s = tt_split(flat, h);
      const auto back = s.scale_part + s.conformal_part + s.tt_part;
      CHECK(max_abs_diff(back, h) < 1e-13 * (1.0 + h.max_abs()));
      CHECK(s.max_orthogonality <= 1e-8);
      CHECK(s.div_tt <= 1e-8 * l2(flat, h));
      CHECK(s.trace_tt <= 1e-8 * l2(flat, h));
      CHECK(std::abs(manifold::integrate(flat, s.u)) < 1e-10 * (1.0 + l2(flat, s.u)));
      // K is the constant part of tt, so the remainder has zero mean
      const auto rest = s.tt_part - s.kernel_part;
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (double v : rest.component(c)) mean += v;
        CHECK(std::abs(mean / grid.node_count()) < 1e-12);
      }
    }
  }
  SUBCASE("preconditions") {
    const auto curved = test_util::smooth_metric(grid, rng, 0.1);
    CHECK_THROWS_AS(tt_split(curved, curved.g()), InvalidArgument);
    const auto X = test_util::smooth_vector(grid, rng, 1.0, 2);
    CHECK_THROWS_AS(tt_split(flat, manifold::divergence_adjoint(flat, X)), InvalidArgument);
  }
}

TEST_CASE("sectors are invariant under the Lichnerowicz Laplacian") {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  std::mt19937_64 rng(37);
  const auto h = random_ker_div(flat, rng);
  const auto s = tt_split(flat, h);

  CHECK(manifold::lichnerowicz(flat, s.scale_part).max_abs() < 1e-12);
  const auto Lc = manifold::lichnerowicz(flat, s.conformal_part);
  CHECK(max_abs_diff(project_conformal(flat, Lc), Lc) < 1e-9 * (1.0 + Lc.max_abs()));
  const auto Lt = manifold::lichnerowicz(flat, s.tt_part);
  CHECK(l2(flat, manifold::divergence(flat, Lt)) < 1e-8 * (1.0 + l2(flat, Lt)));
  CHECK(l2(flat, manifold::trace(flat, Lt)) < 1e-8 * (1.0 + l2(flat, Lt)));
  CHECK(l2(flat, project_conformal(flat, Lt)) < 1e-8 * (1.0 + l2(flat, Lt)));
}

TEST_CASE("Lichnerowicz spectrum by sector") {
  const auto grid = torus(25);
  const auto flat = MetricField::flat(grid);

  SUBCASE("TT: a two-dimensional kernel and nothing else") {
    const auto sp = lichnerowicz_spectrum(flat, Sector::tt, 4);
    CHECK(sp.sector_rank == 2);
    REQUIRE(sp.values.size() == 2);
    for (double v : sp.values) CHECK(std::abs(v) < 1e-8);
    for (const auto& m : sp.modes) {
      CHECK(manifold::trace(flat, m).max_abs() < 1e-8 * m.max_abs());
      CHECK(manifold::lichnerowicz(flat, m).max_abs() < 1e-8 * m.max_abs());
    }
  }
  SUBCASE("im C: strictly negative, top eigenvalue -|k|^2 = -1 four times") {
    const auto sp = lichnerowicz_spectrum(flat, Sector::conformal, 5);
    REQUIRE(sp.values.size() == 5);
    CHECK(sp.values.front() == doctest::Approx(-2.0).epsilon(1e-9));
    for (int j = 1; j < 5; ++j) CHECK(sp.values[j] == doctest::Approx(-1.0).epsilon(1e-9));
  }
  SUBCASE("scale direction") {
    const auto sp = lichnerowicz_spectrum(flat, Sector::scale, 1);
    REQUIRE(sp.values.size() == 1);
    CHECK(std::abs(sp.values[0]) < 1e-10);
    CHECK(manifold::lichnerowicz(flat, sp.modes[0]).max_abs() < 1e-10);
  }
  SUBCASE("ker div and all tensors") {
    // constants (dimension 3) at 0, then the |k| = 1 modes at -1
    const auto kd = lichnerowicz_spectrum(flat, Sector::ker_div, 5);
    const auto all = lichnerowicz_spectrum(flat, Sector::all, 5);
    for (const auto* sp : {&kd, &all}) {
      REQUIRE(sp->values.size() == 5);
      CHECK(sp->values[0] == doctest::Approx(-1.0).epsilon(1e-9));
      CHECK(sp->values[1] == doctest::Approx(-1.0).epsilon(1e-9));
      for (int j = 2; j < 5; ++j) CHECK(std::abs(sp->values[j]) < 1e-9);
    }
  }
  SUBCASE("three-torus TT kernel has dimension 5") {
    const auto g3 = MetricField::flat(PeriodicGrid::cube(3, 9));
    const auto sp = lichnerowicz_spectrum(g3, Sector::tt, 7);
    REQUIRE(sp.values.size() == 7);
    CHECK(sp.values[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(sp.values[1] == doctest::Approx(-1.0).epsilon(1e-9));
    for (int j = 2; j < 7; ++j) CHECK(std::abs(sp.values[j]) < 1e-9);
  }
  SUBCASE("sector names") {
    for (auto s : {Sector::all, Sector::ker_div, Sector::tt, Sector::conformal, Sector::scale})
      CHECK(parse_sector(to_string(s)) == s);
    CHECK_THROWS_AS(parse_sector("bogus"), InvalidArgument);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(lichnerowicz_spectrum(test_util::smooth_metric(grid, rng, 0.1), Sector::tt, 2), InvalidArgument);
  }
}

TEST_CASE("normal projection away from the flat family") {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  std::mt19937_64 rng(41);

  SUBCASE("kernel equals the constant symmetric matrices") {
    const auto basis = flat_family_basis(flat);
    CHECK(basis.size() == 3u);
    for (std::size_t a = 0; a < basis.size(); ++a) {
      CHECK(project_normal(flat, basis[a]).max_abs() < 1e-13);
      for (std::size_t b = 0; b < basis.size(); ++b)
        CHECK(manifold::inner(flat, basis[a], basis[b]) == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-13));
    }
    Eigen::MatrixXd m(2, 2);
    m << 0.7, -0.1, -0.1, 0.2;
    CHECK(project_normal(flat, constant_tensor(grid, m)).max_abs() < 1e-13);
  }
  SUBCASE("mean-zero modes are untouched") {
    const auto h = conformal_op(flat, cos_x1(grid));
    CHECK(max_abs_diff(project_normal(flat, h), h) < 1e-14);
  }
  SUBCASE("Rayleigh quotient on the normal space") {
    double worst = -1e300;
    for (int trial = 0; trial < 100; ++trial) {
      auto h = project_normal(flat, random_ker_div(flat, rng, 3));
      const double q = manifold::inner(flat, h, manifold::lichnerowicz(flat, h)) / manifold::inner(flat, h, h);
      worst = std::max(worst, q);
    }
    MESSAGE("empirical c = " << -worst);
    // lowest nonzero |k|^2 on [0, 2 pi)^2 is 1
    CHECK(worst <= -1.0 + 1e-9);
  }
}
