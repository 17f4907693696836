#include "lambda_lab/flow.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <nlohmann/json.hpp>

#include "lambda_lab/decomp.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/parallel.hpp"
#include "lambda_lab/spectral.hpp"
#include "lambda_lab/variation.hpp"

namespace lambda_lab::flow {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// g + a v as a metric; positivity loss becomes a NumericalError.
MetricField shifted(const MetricField& g, double a, const SymTensorField& v) {
  SymTensorField x = g.g();
  x.axpy(a, v);
  try {
    return MetricField(std::move(x));
  } catch (const InvalidArgument&) {
    throw NumericalError(NumericalFailure::positivity_loss, "flow: metric lost positive definiteness");
  }
}

/// Pointwise max of |Rm|_g.
double curvature_sup(const MetricField& g) {
  const auto curv = manifold::curvature(g);
  const int n = g.dim();
  double best = 0.0;
  std::vector<double> up(n * n * n * n);
  for (std::size_t k = 0; k < g.grid().node_count(); ++k) {
    Eigen::MatrixXd gi = g.ginv().matrix(k);
    // raise all four indices, then contract
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
              for (int p = 0; p < n; ++p)
                for (int j = 0; j < n; ++j)
                  for (int q = 0; q < n; ++q)
                    s += gi(a, i) * gi(b, p) * gi(c, j) * gi(d, q) * curv.riemann_at(i, p, j, q, k);
            up[((a * n + b) * n + c) * n + d] = s;
          }
    double sq = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) sq += up[((a * n + b) * n + c) * n + d] * curv.riemann_at(a, b, c, d, k);
    best = std::max(best, std::sqrt(std::max(0.0, sq)));
  }
  return best;
}

}  // namespace

// ==== Ricci-DeTurck flow ====

std::string to_string(Gauge g) { return g == Gauge::deturck ? "deturck" : "ricci"; }

Gauge parse_gauge(const std::string& name) {
  const auto s = lower(name);
  if (s == "deturck") return Gauge::deturck;
  if (s == "ricci") return Gauge::ricci;
  throw InvalidArgument("unknown gauge '" + name + "' (expected deturck, ricci)");
}

VectorField deturck_field(const MetricField& g) {
  const int n = g.dim();
  const auto G = manifold::christoffel(g);
  VectorField W(g.grid());
  for (std::size_t k = 0; k < g.grid().node_count(); ++k) {
    double up[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < n; ++c)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) up[c] += g.ginv_at(p, q, k) * G(c, p, q, k);
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < n; ++c) s += g.g_at(j, c, k) * up[c];
      W(j, k) = s;
    }
  }
  return W;
}

SymTensorField flow_velocity(const MetricField& g, Gauge gauge) {
  SymTensorField v = manifold::ricci(g);
  v *= -2.0;
  if (gauge == Gauge::deturck) v += manifold::lie_derivative(g, deturck_field(g));
  return v;
}

double stable_time_step(const MetricField& g, double kappa) {
  const double h = g.grid().min_spacing();
  return kappa * h * h / (g.dim() * g.max_inverse_eigenvalue());
}

MetricField deturck_step(const MetricField& g, double dt, Gauge gauge) {
  if (!(dt > 0.0) || dt > stable_time_step(g) * (1.0 + 1e-12))
    throw InvalidArgument("deturck_step: dt outside (0, stable bound]");
  const auto k1 = flow_velocity(g, gauge);
  const auto k2 = flow_velocity(shifted(g, 0.5 * dt, k1), gauge);
  const auto k3 = flow_velocity(shifted(g, 0.5 * dt, k2), gauge);
  const auto k4 = flow_velocity(shifted(g, dt, k3), gauge);
  SymTensorField incr = k1;
  incr.axpy(2.0, k2).axpy(2.0, k3).axpy(1.0, k4);
  return shifted(g, dt / 6.0, incr);
}

// ==== monitored runs ====

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::converged: return "converged";
    case FlowStatus::max_time: return "max_time";
    case FlowStatus::diverged: return "diverged";
    case FlowStatus::positivity_lost: return "positivity_lost";
    case FlowStatus::solver_failure: return "solver_failure";
  }
  return "?";
}

FlowRecord run_flow(const MetricField& g0, const FlowConfig& cfg, const std::optional<MetricField>& g_ref,
                    const SnapshotSink& snapshots) {
  const double bound = stable_time_step(g0, cfg.kappa);
  // the default keeps 10% headroom for the bound to shrink as g evolves
  const double dt = cfg.dt > 0.0 ? cfg.dt : 0.9 * bound;
  if (dt > bound * (1.0 + 1e-12))
    throw InvalidArgument("run_flow: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(bound));
  if (cfg.monitor_every < 1 || cfg.converged_rows < 1 || !(cfg.max_time >= 0.0))
    throw InvalidArgument("run_flow: monitor_every and converged_rows must be >= 1, max_time >= 0");

  const MetricField ref = g_ref ? *g_ref : MetricField::flat(g0.grid());
  const int n = g0.dim();
  auto advance = [&](const MetricField& g) {
    if (dt > stable_time_step(g) * (1.0 + 1e-12))
      throw NumericalError(NumericalFailure::divergence, "flow: time step exceeds the stability bound of g(t)");
    return deturck_step(g, dt, cfg.gauge);
  };

  FlowRecord rec;
  rec.dt = dt;
  MetricField g = g0;
  std::optional<MetricField> prev, next;
  int quiet = 0;
  double rm0 = 0.0;
  double rc_integral = 0.0, rc_last = 0.0;

  // a metric at which the velocity vanishes is a fixed point: no transient to wait out
  const bool fixed_point = flow_velocity(g0, cfg.gauge).max_abs() <= 1e-12;

  try {
    for (int step = 0;; ++step) {
      const double t = step * dt;
      const auto rc = manifold::ricci(g);
      const double rc_now = std::sqrt(std::max(0.0, manifold::inner(g, rc, rc)));
      if (step > 0) rc_integral += 0.5 * dt * (rc_last + rc_now);
      rc_last = rc_now;
      if (step % cfg.monitor_every == 0) {
        const auto sd = spectral::ground_state(g);
        const auto G = variation::gradient_field(sd);
        FlowRow row;
        row.step = step;
        row.t = t;
        row.lambda = sd.lambda;
        row.ricci_l2 = G.ricci_norm;
        row.gradient_l2f = G.norm_f;
        const auto diff = g.g() - ref.g();
        row.dist_c0 = manifold::norm(ref, diff, manifold::NormKind::c0);
        row.dist_c2 = manifold::norm(ref, diff, manifold::NormKind::c2);
        row.lojasiewicz_ratio = std::abs(sd.lambda) > 0.0 ? G.norm_f / std::sqrt(std::abs(sd.lambda)) : 0.0;
        row.transversality_ratio = G.ricci_norm > 0.0 ? G.norm_f / G.ricci_norm : 0.0;
        row.twice_gradient_sq = 2.0 * G.norm_f * G.norm_f;
        row.curvature_sup = curvature_sup(g);
        row.ricci_integral = rc_integral;

        if (fixed_point) {
          row.dlambda_dt = 0.0;
        } else {
          next = advance(g);
          const double lp = spectral::lambda(*next);
          if (prev) {
            row.dlambda_dt = (lp - spectral::lambda(*prev)) / (2.0 * dt);
          } else {
            const double lpp = spectral::lambda(advance(*next));
            row.dlambda_dt = (-3.0 * sd.lambda + 4.0 * lp - lpp) / (2.0 * dt);
          }
        }

        // row checks
        if (!rec.rows.empty()) {
          const double before = rec.rows.back().lambda;
          if (row.lambda < before - cfg.monotone_tol * (1.0 + std::abs(row.lambda))) ++rec.monotonicity_violations;
        }
        const double id_err = std::abs(row.dlambda_dt - row.twice_gradient_sq) /
                              std::max(std::abs(row.twice_gradient_sq), cfg.noise_floor);
        rec.max_identity_error = std::max(rec.max_identity_error, id_err);
        if (id_err > cfg.identity_tol) ++rec.identity_violations;
        if (row.dlambda_dt < (2.0 / n) * row.lambda * row.lambda - 1e-8) ++rec.perelman_violations;
        if (rec.rows.empty()) rm0 = row.curvature_sup;
        rec.curvature_growth = std::max(rec.curvature_growth, rm0 > 0.0 ? row.curvature_sup / rm0 : 1.0);

        const int row_index = static_cast<int>(rec.rows.size());
        rec.rows.push_back(row);
        if (snapshots && cfg.snapshot_every > 0 && row_index % cfg.snapshot_every == 0) snapshots(row_index, t, g);

        if (fixed_point && row.ricci_l2 < cfg.rc_tol && std::abs(row.lambda) < cfg.lambda_tol) {
          rec.status = FlowStatus::converged;
          rec.message = "initial metric is a fixed point";
          break;
        }
        quiet = (row.ricci_l2 < cfg.rc_tol && std::abs(row.lambda) < cfg.lambda_tol) ? quiet + 1 : 0;
        if (quiet >= cfg.converged_rows) {
          rec.status = FlowStatus::converged;
          break;
        }
        if (!std::isfinite(row.dist_c2) || row.dist_c2 > cfg.divergence_c2) {
          rec.status = FlowStatus::diverged;
          rec.message = "left the C^2 ball of radius " + std::to_string(cfg.divergence_c2) + " around the reference";
          break;
        }
        if (t >= cfg.max_time) {
          rec.status = FlowStatus::max_time;
          break;
        }
      }
      MetricField g_new = next ? std::move(*next) : advance(g);
      next.reset();
      prev = std::move(g);
      g = std::move(g_new);
    }
  } catch (const NumericalError& e) {
    rec.status = e.kind() == NumericalFailure::positivity_loss ? FlowStatus::positivity_lost
                 : e.kind() == NumericalFailure::divergence    ? FlowStatus::diverged
                                                                : FlowStatus::solver_failure;
    rec.message = e.what();
  }
  rec.final_metric = g;
  return rec;
}

void write_csv(std::ostream& os, const FlowRecord& rec) {
  os << "t,lambda,ricci_l2,gradient_l2f,dist_c0,dist_c2,lojasiewicz_ratio,transversality_ratio,dlambda_dt,"
        "twice_gradient_sq,ricci_integral\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rec.rows)
    os << num(r.t) << ',' << num(r.lambda) << ',' << num(r.ricci_l2) << ',' << num(r.gradient_l2f) << ','
       << num(r.dist_c0) << ',' << num(r.dist_c2) << ',' << num(r.lojasiewicz_ratio) << ','
       << num(r.transversality_ratio) << ',' << num(r.dlambda_dt) << ',' << num(r.twice_gradient_sq) << ','
       << num(r.ricci_integral) << '\n';
}

// ==== post-run checks ====

EnergyDistanceReport energy_distance_check(const FlowRecord& rec, double C1, double C2, double tol) {
  EnergyDistanceReport rep;
  const auto& r = rec.rows;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      ++rep.pairs;
      const double lhs = r[j].ricci_integral - r[i].ricci_integral;
      const double rhs = C1 * C2 * (std::sqrt(std::abs(r[i].lambda)) - std::sqrt(std::abs(r[j].lambda)));
      rep.worst_margin = std::min(rep.worst_margin, rhs - lhs);
      const double decay = std::exp(-2.0 * (r[j].t - r[i].t) / (C1 * C1)) * std::abs(r[i].lambda);
      rep.worst_decay_margin = std::min(rep.worst_decay_margin, decay - std::abs(r[j].lambda));
    }
  if (rep.pairs == 0) rep.worst_margin = rep.worst_decay_margin = 0.0;
  rep.pass = rep.worst_margin >= -tol;
  rep.decay_pass = rep.worst_decay_margin >= -tol;
  return rep;
}

DecayFit fit_decay(const FlowRecord& rec, double floor) {
  std::vector<double> x, y;
  for (const auto& r : rec.rows)
    if (std::abs(r.lambda) > floor) {
      x.push_back(r.t);
      y.push_back(std::log(std::abs(r.lambda)));
    }
  DecayFit fit;
  fit.points = x.size();
  if (x.size() < 2) return fit;
  Eigen::MatrixXd A(x.size(), 2);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    b(i) = y[i];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  fit.intercept = c(0);
  fit.rate = -c(1);
  const double ss_res = (A * c - b).squaredNorm();
  const double ss_tot = (b.array() - b.mean()).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double flat_family_distance(const MetricField& g) {
  const auto mean = MetricField::constant(g.grid(), g.mean_matrix());
  return manifold::norm(mean, g.g() - mean.g(), manifold::NormKind::c0);
}

// ==== stability experiment ====

Perturbation conformal_mode(const PeriodicGrid& grid, const std::vector<int>& m) {
  if (static_cast<int>(m.size()) != grid.dim()) throw InvalidArgument("conformal_mode: wave vector has wrong length");
  const auto u = sample(grid, [&](auto x) {
    double ph = 0.0;
    for (int a = 0; a < grid.dim(); ++a) ph += 2.0 * std::numbers::pi * m[a] * x[a] / grid.period(a);
    return std::cos(ph);
  });
  std::string label = "conformal(";
  for (std::size_t a = 0; a < m.size(); ++a) label += (a ? "," : "") + std::to_string(m[a]);
  return {label + ")", decomp::conformal_op(MetricField::flat(grid), u)};
}

Perturbation tt_constant(const PeriodicGrid& grid) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(grid.dim(), grid.dim());
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return {"tt-constant", constant_tensor(grid, m)};
}

StabilitySummary stability_experiment(const PeriodicGrid& grid, const std::vector<double>& amplitudes,
                                      const std::vector<Perturbation>& modes, const FlowConfig& cfg) {
  StabilitySummary sum;
  const auto flat = MetricField::flat(grid);
  const std::size_t count = amplitudes.size() * modes.size();
  sum.runs.resize(count);
  parallel_for(count, [&](std::size_t idx) {
    const auto& mode = modes[idx / amplitudes.size()];
    const double a = amplitudes[idx % amplitudes.size()];
    StabilityRun run;
    run.label = mode.label;
    run.amplitude = a;
    SymTensorField g0 = flat.g();
    g0.axpy(a, mode.direction);
    const auto rec = run_flow(MetricField(std::move(g0)), cfg);
    run.status = rec.status;
    run.message = rec.message;
    run.final_time = rec.rows.empty() ? 0.0 : rec.rows.back().t;
    run.final_ricci = rec.rows.empty() ? 0.0 : rec.rows.back().ricci_l2;
    run.distance_to_delta = manifold::norm(flat, rec.final_metric->g() - flat.g(), manifold::NormKind::c0);
    run.distance_to_flat = flat_family_distance(*rec.final_metric);
    run.fit = fit_decay(rec);
    sum.runs[idx] = run;
  });
  for (const auto& r : sum.runs) {
    if (r.status == FlowStatus::converged)
      sum.largest_converged_amplitude = std::max(sum.largest_converged_amplitude, r.amplitude);
    else
      sum.all_converged = false;
  }
  return sum;
}

// ==== Lojasiewicz and transversality scans ====

ScanReport lojasiewicz_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                            const ScanOptions& opts) {
  ScanReport rep;
  rep.seed = seed;
  rep.resolution = grid.res(0);
  rep.rows.resize(samples);
  sampling::SamplerOptions flat_opts = opts.sampler;
  flat_opts.kinds = {sampling::Kind::flat};
  sampling::SamplerOptions single_opts = opts.sampler;
  single_opts.single_mode = true;
  parallel_for(samples, [&](std::size_t i) {
    ScanRow row;
    row.index = i;
    row.flat_member = opts.flat_every > 0 && i % opts.flat_every == 0;
    row.single_mode = !row.flat_member && opts.single_every > 0 && i % opts.single_every == opts.single_every - 1;
    const auto s = sampling::draw(grid, row.flat_member ? flat_opts : row.single_mode ? single_opts : opts.sampler, seed, i);
    const auto G = variation::gradient_field(s.metric());
    row.lambda = G.lambda;
    row.gradient_l2f = G.norm_f;
    row.ricci_l2 = G.ricci_norm;
    row.ricci_l2f = G.ricci_norm_f;
    row.orthogonality = G.orthogonality;
    if (std::abs(row.lambda) >= opts.lambda_floor) row.ratio_b = G.norm_f / std::sqrt(std::abs(row.lambda));
    if (row.ricci_l2 >= opts.ricci_floor) row.ratio_c = G.norm_f / row.ricci_l2;
    rep.rows[i] = row;
  });
  for (const auto& r : rep.rows) {
    if (std::isnan(r.ratio_b)) ++rep.excluded_b;
    else rep.c_B = std::min(rep.c_B, r.ratio_b);
    if (std::isnan(r.ratio_c)) ++rep.excluded_c;
    else rep.c_C = std::min(rep.c_C, r.ratio_c);
    if (r.gradient_l2f > r.ricci_l2f + 1e-8) ++rep.ordering_violations;
    if (r.ricci_l2 > 0.0) rep.max_orthogonality = std::max(rep.max_orthogonality, std::abs(r.orthogonality) / (r.ricci_l2 * r.ricci_l2));
  }
  return rep;
}

std::string scan_json(const ScanReport& rep) {
  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["c_B"] = finite(rep.c_B);
  j["c_C"] = finite(rep.c_C);
  j["C1"] = finite(rep.C1());
  j["C2"] = finite(rep.C2());
  j["samples"] = rep.rows.size();
  j["seed"] = rep.seed;
  j["resolution"] = rep.resolution;
  j["excluded"] = {{"lambda", rep.excluded_b}, {"ricci", rep.excluded_c}};
  j["ordering_violations"] = rep.ordering_violations;
  j["max_orthogonality"] = rep.max_orthogonality;
  return j.dump(2);
}

PositiveLambdaProbe positive_lambda_probe(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                          const sampling::SamplerOptions& opts, double floor) {
  std::vector<double> lam(samples);
  parallel_for(samples, [&](std::size_t i) { lam[i] = spectral::lambda(sampling::draw(grid, opts, seed, i).metric()); });
  PositiveLambdaProbe p;
  p.samples = samples;
  for (double l : lam) {
    p.max_lambda = std::max(p.max_lambda, l);
    if (l > floor) ++p.positive;
  }
  return p;
}

}  // namespace lambda_lab::flow
