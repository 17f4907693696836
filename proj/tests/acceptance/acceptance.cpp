// Acceptance suite: one PASS/FAIL line per criterion on stdout, exit code 1
// if any criterion fails. Details and timings follow each verdict.
//
//   acceptance [--only name[,name...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lambda_lab/decomp.hpp"
#include "lambda_lab/flow.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/sampling.hpp"
#include "lambda_lab/spectral.hpp"
#include "lambda_lab/variation.hpp"

using namespace lambda_lab;
using namespace lambda_lab::variation;

namespace {

constexpr int kRes = 33;
constexpr std::uint64_t kSeed = 42;

PeriodicGrid torus(int res = kRes) { return PeriodicGrid::cube(2, res); }

double rel(double a, double b, double floor = 0.0) { return std::abs(a - b) / std::max(std::abs(b), floor); }

/// h = C u for u = cos x1 at the flat metric.
SymTensorField cu_mode(const PeriodicGrid& grid) {
  const auto u = sample(grid, [](auto x) { return std::cos(x[0]); });
  return decomp::conformal_op(MetricField::flat(grid), u);
}

/// Seeded base point in the C^2 ball and a seeded direction.
MetricField base_point(const PeriodicGrid& grid, std::uint64_t seed, std::size_t i) {
  return sampling::draw(grid, {}, seed, i).metric();
}

SymTensorField direction(const PeriodicGrid& grid, std::uint64_t seed, std::size_t i) {
  return sampling::random_tensor(grid, seed, 1000 + i, 3);
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

/// Scans shared between criteria, computed once.
struct Scans {
  std::optional<flow::ScanReport> coarse, fine;  // 25^2 and 33^2
  const flow::ScanReport& get(int res) {
    auto& slot = res == kRes ? fine : coarse;
    if (!slot) slot = flow::lojasiewicz_scan(torus(res), 500, kSeed);
    return *slot;
  }
} scans;

// ==== criteria ====

void flat_baseline(Verdict& v) {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  const auto sd = spectral::ground_state(flat);
  double werr = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k)
    werr = std::max(werr, std::abs(sd.w[k] - 1.0 / (2.0 * std::numbers::pi)));
  const auto G = gradient_field(sd);
  v.detail << "lambda " << sd.lambda << ", max|w - 1/2pi| " << werr << ", max|G| " << G.field.max_abs();
  v.require(std::abs(sd.lambda) <= 1e-8, "lambda");
  v.require(werr <= 1e-6, "w");
  v.require(G.field.max_abs() <= 1e-8, "gradient");
}

void gradient_check(Verdict& v) {
  const auto grid = torus();
  double worst = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto g = base_point(grid, 1, i);
    const auto h = direction(grid, 1, i);
    const auto sd = spectral::ground_state(g);
    worst = std::max(worst, rel(first_variation(sd, h).value, fd_variation(g, h, 1).value));
  }
  v.detail << "50 pairs, max relative error " << worst;
  v.require(worst <= 1e-6, "relative error");
}

void second_variation_closed_form(Verdict& v) {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  const auto sd = spectral::ground_state(flat);
  const auto h = cu_mode(grid);
  const double series = second_variation(sd, h).value, closed = second_variation_ricci_flat(flat, h).value,
               fd = fd_variation(flat, h, 2).value;
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto k = decomp::gauge_split(flat, direction(grid, 2, i)).h0;
    worst = std::max(worst, rel(second_variation(sd, k).value, second_variation_ricci_flat(flat, k).value));
  }
  v.detail << "D2 lambda[Cu,Cu]: series " << series << ", closed form " << closed << ", FD " << fd
           << "; 20 ker-div samples, max relative error " << worst;
  for (double x : {series, closed, fd}) v.require(std::abs(x + 0.25) <= 1e-3, "-1/4");
  v.require(worst <= 1e-6, "series vs closed form");
}

void contour_cross_oracle(Verdict& v) {
  const auto grid = torus();
  double worst_contour = 0.0, worst_fd = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto g = base_point(grid, 3, i);
    const auto h = direction(grid, 3, i);
    const auto sd = spectral::ground_state(g);
    const auto s = series_terms(sd, h);
    const auto c = contour_terms(sd, h);
    const auto r = residue_terms(s);
    // terms that cancel to round-off are compared against the size of the sum
    const double scale = std::abs(r.order2) + std::abs(r.t2) + std::abs(r.t3) + std::abs(r.t4) + std::abs(r.t5);
    for (auto [a, b] : {std::pair{c.order2, r.order2}, {c.t2, r.t2}, {c.t3, r.t3}, {c.t4, r.t4}, {c.t5, r.t5}})
      worst_contour = std::max(worst_contour, rel(a, b, 1e-3 * scale));
    worst_fd = std::max(worst_fd, rel(s.third(), fd_variation(g, h, 3).value));
  }
  v.detail << "20 samples, contour vs residue max relative " << worst_contour << ", order 3 vs FD max relative "
           << worst_fd;
  v.require(worst_contour <= 1e-8, "contour vs residue");
  v.require(worst_fd <= 1e-4, "order 3 vs FD");
}

void third_variation_bound(Verdict& v) {
  const auto rep = third_variation_bound_scan(torus(), 100, kSeed, {0.02, 0.01, 0.005});
  v.detail << rep.rows.size() << " samples, max ratio " << rep.max_ratio << ", max spread across s " << rep.max_spread;
  v.require(rep.rows.size() == 100, "sample count");
  v.require(std::isfinite(rep.max_ratio), "finite ratio");
  v.require(rep.max_spread <= 1.5, "spread");
}

void lambda_sign(Verdict& v) {
  const auto rep = lambda_sign_scan(torus(), 200, kSeed, {}, 10);
  std::size_t flat = 0;
  for (const auto& r : rep.rows) flat += r.flat_member;
  v.detail << rep.rows.size() << " samples (" << flat << " flat-family), max lambda " << rep.max_lambda
           << ", strict violations " << rep.strict_violations << ", flat violations " << rep.flat_violations;
  v.require(rep.rows.size() == 200, "sample count");
  v.require(rep.max_lambda <= 1e-8, "lambda <= 1e-8");
  v.require(rep.strict_violations == 0, "lambda < -1e-10 off the flat family");
  v.require(rep.flat_violations == 0, "lambda = 0 on the flat family");
}

void lojasiewicz_transversality(Verdict& v) {
  const auto& a = scans.get(25);
  const auto& b = scans.get(kRes);
  const double db = rel(a.c_B, b.c_B), dc = rel(a.c_C, b.c_C);
  v.detail << "c_B " << a.c_B << " (25^2) / " << b.c_B << " (33^2), c_C " << a.c_C << " / " << b.c_C
           << ", relative changes " << db << " / " << dc << ", excluded " << b.excluded_b << "+" << b.excluded_c
           << ", ordering violations " << a.ordering_violations + b.ordering_violations;
  v.require(a.rows.size() == 500 && b.rows.size() == 500, "sample count");
  v.require(a.c_B > 0.0 && b.c_B > 0.0 && std::isfinite(b.c_B), "c_B > 0");
  v.require(a.c_C > 0.0 && b.c_C > 0.0 && std::isfinite(b.c_C), "c_C > 0");
  v.require(db <= 0.2 && dc <= 0.2, "grid stability");
  v.require(a.ordering_violations + b.ordering_violations == 0, "||G||_f <= ||Rc||_f");
}

void orthogonality(Verdict& v) {
  const double worst = std::max(scans.get(25).max_orthogonality, scans.get(kRes).max_orthogonality);
  v.detail << "1000 sampled metrics, max |<Hess f, G>_f| / ||Rc||^2 " << worst;
  v.require(worst <= 1e-6, "orthogonality");
}

void linearization(Verdict& v) {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  const auto h = decomp::gauge_split(flat, direction(grid, 4, 0)).h0;
  const auto L = linearized_gradient(flat, h);
  struct Fd {
    SymTensorField dG;
    ScalarField df;
  };
  auto fd = [&](double e) {
    const auto gp = spectral::ground_state(MetricField(flat.g() + e * h));
    const auto gm = spectral::ground_state(MetricField(flat.g() - e * h));
    return Fd{(1.0 / (2 * e)) * (gradient_field(gp).field - gradient_field(gm).field), (1.0 / (2 * e)) * (gp.f - gm.f)};
  };
  auto mean_free_max = [](ScalarField u) {
    double mean = 0.0;
    for (double x : u.data()) mean += x;
    mean /= u.nodes();
    double m = 0.0;
    for (double x : u.data()) m = std::max(m, std::abs(x - mean));
    return m;
  };
  const auto a = fd(1e-2), b = fd(5e-3);
  const double e1 = (a.dG - L.gradient_rate).max_abs(), e2 = (b.dG - L.gradient_rate).max_abs();
  const double order = std::log2(e1 / e2);
  // Richardson removes the e^2 term of the centered difference
  const ScalarField df = (4.0 / 3.0) * b.df - (1.0 / 3.0) * a.df;
  const double f_err = mean_free_max(df - L.f_rate);
  v.detail << "gradient FD errors " << e1 << ", " << e2 << " (observed order " << order
           << "), f-rate error up to a constant " << f_err;
  v.require(order >= 1.8 && order <= 2.2, "order 2");
  v.require(f_err <= 1e-6, "f-rate");
}

void flow_suite(Verdict& v) {
  const auto grid = torus();
  const auto& scan = scans.get(kRes);
  const auto flat = MetricField::flat(grid);
  SymTensorField g0 = flat.g();
  g0.axpy(0.02, cu_mode(grid));
  const auto t0 = std::chrono::steady_clock::now();
  const auto rec = flow::run_flow(MetricField(std::move(g0)), {});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto ed = flow::energy_distance_check(rec, scan.C1(), scan.C2());
  const auto fit = flow::fit_decay(rec);
  const double final_rc = rec.rows.empty() ? NAN : rec.rows.back().ricci_l2;
  v.detail << flow::to_string(rec.status) << " after " << rec.rows.size() << " rows, final ||Rc|| " << final_rc
           << ", monotonicity violations " << rec.monotonicity_violations << ", max identity error "
           << rec.max_identity_error << ", lower-bound violations " << rec.perelman_violations
           << ", energy-distance worst margin " << ed.worst_margin << " (C1 " << scan.C1() << ", C2 " << scan.C2()
           << "), decay R^2 " << fit.r_squared << " rate " << fit.rate << ", flow " << secs << " s";
  v.require(rec.converged(), "convergence");
  v.require(final_rc < 1e-8, "final ||Rc||");
  v.require(rec.monotonicity_violations == 0, "monotone lambda");
  v.require(rec.identity_violations == 0 && rec.max_identity_error <= 1e-3, "dlambda/dt identity");
  v.require(rec.perelman_violations == 0, "dlambda/dt >= (2/n) lambda^2");
  v.require(ed.pass, "energy-distance inequality");
  v.require(fit.r_squared >= 0.99, "exponential decay");
  v.require(secs <= 900.0, "runtime");
}

void decomposition_suite(Verdict& v) {
  const auto grid = torus();
  const auto flat = MetricField::flat(grid);
  double reassembly = 0.0, tt_orth = 0.0, imc_max = -INFINITY;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto h = direction(grid, 5, i);
    const auto gs = decomp::gauge_split(flat, h);
    reassembly = std::max(reassembly, (gs.h0 + manifold::divergence_adjoint(flat, gs.X) - h).max_abs() / h.max_abs());
    const auto ts = decomp::tt_split(flat, gs.h0);
    tt_orth = std::max(tt_orth, ts.max_orthogonality);
    const auto u = sampling::random_scalar(grid, 5, 2000 + i, 3);
    imc_max = std::max(imc_max, second_variation_ricci_flat(flat, decomp::conformal_op(flat, u)).value);
  }
  const auto tt = decomp::lichnerowicz_spectrum(flat, decomp::Sector::tt, 4);
  const auto all = decomp::lichnerowicz_spectrum(flat, decomp::Sector::all, 8);
  const auto imc = decomp::lichnerowicz_spectrum(flat, decomp::Sector::conformal, 4);
  double tt_kernel = 0.0;
  for (double x : tt.values) tt_kernel = std::max(tt_kernel, std::abs(x));
  const double top = *std::max_element(all.values.begin(), all.values.end());
  const double imc_top = *std::max_element(imc.values.begin(), imc.values.end());
  v.detail << "gauge reassembly " << reassembly << ", TT orthogonality " << tt_orth << ", TT rank " << tt.sector_rank
           << " with max|eig| " << tt_kernel << ", top Lichnerowicz eigenvalue " << top << ", top on im C " << imc_top
           << ", max D2 lambda on im C " << imc_max;
  v.require(reassembly <= 1e-12, "gauge reassembly");
  v.require(tt_orth <= 1e-8, "TT orthogonality");
  v.require(tt.sector_rank == 2 && tt.values.size() == 2 && tt_kernel <= 1e-8, "2-dimensional TT kernel");
  v.require(top <= 1e-8, "no positive eigenvalue");
  v.require(imc_top < -1e-8 && imc_max < 0.0, "im C negative");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string s; std::getline(ss, s, ',');) only.push_back(s);
    }

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"flat_baseline", flat_baseline},
      {"gradient_check", gradient_check},
      {"second_variation_closed_form", second_variation_closed_form},
      {"contour_cross_oracle", contour_cross_oracle},
      {"third_variation_bound", third_variation_bound},
      {"lambda_sign", lambda_sign},
      {"lojasiewicz_transversality", lojasiewicz_transversality},
      {"orthogonality", orthogonality},
      {"linearization", linearization},
      {"flow_suite", flow_suite},
      {"decomposition_suite", decomposition_suite},
  };

  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail.str() << " (" << std::fixed
              << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::setprecision(6) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
