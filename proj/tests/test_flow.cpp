#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "lambda_lab/error.hpp"
#include "lambda_lab/flow.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/spectral.hpp"
#include "test_util.hpp"

using namespace lambda_lab;
using namespace lambda_lab::flow;
using test_util::max_abs_diff;

namespace {

MetricField perturbed(const PeriodicGrid& grid, double a, const SymTensorField& dir) {
  SymTensorField g = MetricField::flat(grid).g();
  g.axpy(a, dir);
  return MetricField(std::move(g));
}

/// Scan constants shared by the run checks (500 samples, seed 42).
const ScanReport& scan_17() {
  static const ScanReport rep = lojasiewicz_scan(PeriodicGrid::cube(2, 17), 500, 42);
  return rep;
}

}  // namespace

// ==== single steps ====

TEST_CASE("flat metrics are fixed points") {
  const auto grid = PeriodicGrid::cube(2, 17);
  Eigen::MatrixXd m(2, 2);
  m << 1.3, 0.2, 0.2, 0.8;
  for (const auto& g : {MetricField::flat(grid), MetricField::constant(grid, 2.5 * Eigen::MatrixXd::Identity(2, 2)),
                        MetricField::constant(grid, m)}) {
    CHECK(deturck_field(g).max_abs() < 1e-14);
    const double dt = stable_time_step(g);
    CHECK(max_abs_diff(deturck_step(g, dt).g(), g.g()) < 1e-13);
  }
}

TEST_CASE("time step bound") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto flat = MetricField::flat(grid);
  const double h = grid.min_spacing();
  CHECK(stable_time_step(flat) == doctest::Approx(0.2 * h * h / 2.0));
  CHECK(stable_time_step(MetricField::constant(grid, 4.0 * Eigen::MatrixXd::Identity(2, 2))) ==
        doctest::Approx(0.2 * h * h * 4.0 / 2.0));
  CHECK_THROWS_AS(deturck_step(flat, 1.01 * stable_time_step(flat)), InvalidArgument);
  CHECK_THROWS_AS(deturck_step(flat, 0.0), InvalidArgument);
  FlowConfig cfg;
  cfg.dt = 2.0 * stable_time_step(flat);
  CHECK_THROWS_AS(run_flow(flat, cfg), InvalidArgument);
}

TEST_CASE("DeTurck velocity linearizes to the componentwise Laplacian") {
  const auto grid = PeriodicGrid::cube(2, 25);
  std::mt19937_64 rng(3);
  const auto h = test_util::smooth_tensor(grid, rng, 1.0, 2);
  SymTensorField lap(grid);
  for (int s = 0; s < h.component_count(); ++s) {
    ScalarField c(grid);
    std::copy(h.component(s).begin(), h.component(s).end(), c.data().begin());
    const auto l = manifold::laplace_beltrami(MetricField::flat(grid), c);
    std::copy(l.data().begin(), l.data().end(), lap.component(s).begin());
  }
  auto err = [&](double e) {
    const auto d = (1.0 / (2 * e)) * (flow_velocity(perturbed(grid, e, h)) - flow_velocity(perturbed(grid, -e, h)));
    return max_abs_diff(d, lap);
  };
  const double e1 = err(1e-2), e2 = err(5e-3);
  CHECK(e1 < 1e-2 * lap.max_abs());
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
  // Ricci flow alone is only weakly parabolic: its linearization differs by a Lie derivative
  const auto gauge_part = flow_velocity(perturbed(grid, 1e-3, h)) - flow_velocity(perturbed(grid, 1e-3, h), Gauge::ricci);
  CHECK(gauge_part.max_abs() > 1e-4);
}

TEST_CASE("lambda increases along the flow") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto u = sample(grid, [](auto x) { return 0.05 * std::sin(x[0]); });
  MetricField g = MetricField::conformal(u);
  const double dt = 0.9 * stable_time_step(g);
  double prev = spectral::lambda(g);
  CHECK(prev < 0.0);
  for (int i = 0; i < 100; ++i) {
    g = deturck_step(g, dt);
    if (i % 10 == 9) {
      const double l = spectral::lambda(g);
      CHECK(l > prev);
      prev = l;
    }
  }
}

// ==== monitored runs ====

TEST_CASE("run from the flat torus") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto rec = run_flow(MetricField::flat(grid), {});
  CHECK(rec.converged());
  REQUIRE(rec.rows.size() == 1);
  CHECK(std::abs(rec.rows[0].lambda) < 1e-12);
  const auto ed = energy_distance_check(rec, 1.0, 1.0);
  CHECK(ed.pass);
  CHECK(ed.worst_margin == 0.0);
}

TEST_CASE("conformal perturbation converges to a flat metric") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto mode = conformal_mode(grid, {1, 0});
  int snaps = 0;
  FlowConfig cfg;
  cfg.snapshot_every = 50;
  const auto rec = run_flow(perturbed(grid, 0.02, mode.direction), cfg, {},
                            [&](int, double, const MetricField&) { ++snaps; });
  REQUIRE(rec.converged());
  const auto& last = rec.rows.back();
  CHECK(last.ricci_l2 < 1e-8);
  CHECK(std::abs(last.lambda) < 1e-12);
  CHECK(flat_family_distance(*rec.final_metric) < 1e-6);
  CHECK(rec.monotonicity_violations == 0u);
  CHECK(rec.identity_violations == 0u);
  CHECK(rec.max_identity_error < 1e-3);
  CHECK(rec.perelman_violations == 0u);
  CHECK(rec.curvature_growth < 1.5);
  CHECK(snaps == static_cast<int>((rec.rows.size() + 49) / 50));

  const auto fit = fit_decay(rec);
  CHECK(fit.r_squared >= 0.99);
  CHECK(fit.rate > 0.0);

  const auto& scan = scan_17();
  const auto ed = energy_distance_check(rec, scan.C1(), scan.C2());
  MESSAGE("C1 " << scan.C1() << " C2 " << scan.C2() << " margin " << ed.worst_margin);
  CHECK(ed.pass);
  CHECK(ed.decay_pass);

  std::ostringstream os;
  write_csv(os, rec);
  CHECK(os.str().rfind("t,lambda,ricci_l2,gradient_l2f,dist_c0,dist_c2,lojasiewicz_ratio,transversality_ratio,"
                       "dlambda_dt,twice_gradient_sq,ricci_integral\n",
                       0) == 0);
}

TEST_CASE("DeTurck and Ricci flow give the same lambda curve") {
  const auto grid = PeriodicGrid::cube(2, 17);
  const auto g0 = perturbed(grid, 0.03, conformal_mode(grid, {1, 1}).direction);
  FlowConfig cfg;
  cfg.max_time = 0.2;
  cfg.monitor_every = 5;
  const auto a = run_flow(g0, cfg);
  cfg.gauge = Gauge::ricci;
  const auto b = run_flow(g0, cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(std::abs(a.rows[i].lambda - b.rows[i].lambda) < 1e-4);
}

TEST_CASE("stability experiment") {
  const auto grid = PeriodicGrid::cube(2, 17);
  SUBCASE("conformal modes") {
    const auto sum = stability_experiment(grid, {0.0, 0.01, 0.02, 0.04}, {conformal_mode(grid, {1, 0})});
    CHECK(sum.all_converged);
    CHECK(sum.largest_converged_amplitude == 0.04);
    for (const auto& r : sum.runs) {
      CHECK(r.distance_to_flat < 1e-6);
      if (r.amplitude > 0.0) CHECK(r.fit.rate > 0.0);
    }
  }
  SUBCASE("a flat direction moves the limit") {
    Perturbation p = conformal_mode(grid, {0, 1});
    p.direction += tt_constant(grid).direction;
    p.label = "conformal + tt";
    const auto sum = stability_experiment(grid, {0.02}, {p});
    REQUIRE(sum.all_converged);
    CHECK(sum.runs[0].distance_to_delta > 1e-2);
    CHECK(sum.runs[0].distance_to_flat < 1e-6);
  }
}

// ==== scans ====

TEST_CASE("Lojasiewicz and transversality scan") {
  const auto grid = PeriodicGrid::cube(2, 17);
  SUBCASE("mixtures") {
    const auto& rep = scan_17();
    CHECK(rep.c_B > 0.0);
    CHECK(rep.c_C > 0.0);
    CHECK(rep.c_C <= 1.0);
    CHECK(rep.ordering_violations == 0u);
    CHECK(rep.max_orthogonality < 1e-6);
    CHECK(rep.rows.size() == 500u);
  }
  SUBCASE("flat-direction samples are excluded") {
    ScanOptions o;
    o.flat_every = 2;
    const auto rep = lojasiewicz_scan(grid, 10, 5, o);
    CHECK(rep.excluded_b >= 5u);
    CHECK(rep.excluded_c >= 5u);
    for (const auto& r : rep.rows)
      if (r.flat_member) CHECK(std::isnan(r.ratio_b));
  }
  SUBCASE("pure gauge stays transversal") {
    ScanOptions o;
    o.sampler.kinds = {sampling::Kind::gauge};
    const auto rep = lojasiewicz_scan(grid, 20, 6, o);
    CHECK(rep.c_C > 0.05);
  }
  SUBCASE("determinism and JSON") {
    const auto a = lojasiewicz_scan(grid, 8, 9), b = lojasiewicz_scan(grid, 8, 9);
    CHECK(scan_json(a) == scan_json(b));
    const auto j = nlohmann::json::parse(scan_json(a));
    for (const char* k : {"c_B", "c_C", "samples", "seed", "excluded"}) CHECK(j.contains(k));
  }
  SUBCASE("no positive lambda near the flat torus") {
    const auto p = positive_lambda_probe(grid, 30, 11);
    CHECK(p.positive == 0u);
    CHECK(p.max_lambda < 1e-10);
  }
}

TEST_CASE("decay fit and parsing") {
  FlowRecord rec;
  for (int i = 0; i < 10; ++i) {
    FlowRow r;
    r.t = 0.5 * i;
    r.lambda = -3.0 * std::exp(-2.0 * r.t);
    rec.rows.push_back(r);
  }
  const auto fit = fit_decay(rec);
  CHECK(fit.rate == doctest::Approx(2.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(fit.points == 10u);
  CHECK(parse_gauge("DeTurck") == Gauge::deturck);
  CHECK_THROWS_AS(parse_gauge("harmonic"), InvalidArgument);
}
