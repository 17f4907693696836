#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "lambda_lab/cli.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/flow.hpp"
#include "lambda_lab/snapshot.hpp"
#include "lambda_lab/spectral.hpp"
#include "lambda_lab/variation.hpp"

namespace lambda_lab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
}

std::string failure_name(NumericalFailure k) {
  switch (k) {
    case NumericalFailure::non_convergence: return "non_convergence";
    case NumericalFailure::gap_collapse: return "gap_collapse";
    case NumericalFailure::near_spectrum: return "near_spectrum";
    case NumericalFailure::positivity_loss: return "positivity_loss";
    case NumericalFailure::divergence: return "divergence";
  }
  return "unknown";
}

// ==== lambda ====

void cmd_lambda(const ExperimentConfig& c, const fs::path& dir) {
  const auto g = build_metric(c);
  const auto sd = spectral::ground_state(g, c.lambda.modes);
  json j = spectral::summary_json(sd);
  const auto [fmin, fmax] = std::minmax_element(sd.f.data().begin(), sd.f.data().end());
  j["f"] = {{"min", *fmin}, {"max", *fmax}};
  const auto [wmin, wmax] = std::minmax_element(sd.w.data().begin(), sd.w.data().end());
  j["w"] = {{"min", *wmin}, {"max", *wmax}};
  j["iterations"] = sd.iterations;
  write_json(dir / "summary.json", j);
  snapshot::write(dir / "w.lfld", sd.w);
  snapshot::write(dir / "f.lfld", sd.f);
}

// ==== variations ====

void cmd_variations(const ExperimentConfig& c, const fs::path& dir) {
  const auto g = build_metric(c);
  const auto h = build_direction(c);
  auto rows = variation::evaluate_all(g, h, c.metric.type, c.direction.path.empty() ? "terms" : c.direction.path, c.seed);
  std::erase_if(rows, [&](const variation::VariationResult& r) {
    return std::find(c.variations.orders.begin(), c.variations.orders.end(), r.order) == c.variations.orders.end();
  });
  std::ofstream out(dir / "variations.csv");
  variation::write_csv(out, rows);
}

// ==== flow ====

flow::FlowConfig flow_config(const ExperimentConfig& c) {
  flow::FlowConfig f;
  f.dt = c.flow.dt;
  f.kappa = c.flow.kappa;
  f.max_time = c.flow.max_time;
  f.monitor_every = c.flow.monitor_every;
  f.rc_tol = c.flow.rc_tol;
  f.lambda_tol = c.flow.lambda_tol;
  f.divergence_c2 = c.flow.divergence_c2;
  f.gauge = flow::parse_gauge(c.flow.gauge);
  f.snapshot_every = c.flow.snapshot_every;
  f.seed = c.seed;
  return f;
}

json fit_json(const flow::DecayFit& f) {
  return {{"rate", f.rate}, {"intercept", f.intercept}, {"r_squared", finite(f.r_squared)}, {"points", f.points}};
}

/// Returns false if the run ended in a numerical failure.
bool cmd_flow(const ExperimentConfig& c, const fs::path& dir) {
  const auto grid = c.grid.grid();
  const auto cfg = flow_config(c);
  if (c.flow.stability) {
    const auto sum = flow::stability_experiment(grid, c.flow.amplitudes, parse_modes(c.flow.modes, grid), cfg);
    json runs = json::array();
    for (const auto& r : sum.runs)
      runs.push_back({{"label", r.label},
                      {"amplitude", r.amplitude},
                      {"status", flow::to_string(r.status)},
                      {"final_time", r.final_time},
                      {"final_ricci", r.final_ricci},
                      {"distance_to_delta", r.distance_to_delta},
                      {"distance_to_flat", r.distance_to_flat},
                      {"fit", fit_json(r.fit)},
                      {"message", r.message}});
    write_json(dir / "stability.json", {{"runs", runs},
                                        {"all_converged", sum.all_converged},
                                        {"largest_converged_amplitude", sum.largest_converged_amplitude}});
    return true;
  }

  const auto g0 = build_metric(c);
  if (c.flow.snapshot_every > 0) fs::create_directories(dir / "snapshots");
  auto sink = [&](int row, double, const MetricField& g) {
    char name[32];
    std::snprintf(name, sizeof name, "row_%06d.lfld", row);
    snapshot::write(dir / "snapshots" / name, g.g());
  };
  const auto rec = flow::run_flow(g0, cfg, {}, sink);
  {
    std::ofstream out(dir / "flow.csv");
    flow::write_csv(out, rec);
  }

  json j;
  j["status"] = flow::to_string(rec.status);
  j["message"] = rec.message;
  j["dt"] = rec.dt;
  j["rows"] = rec.rows.size();
  if (!rec.rows.empty()) {
    const auto& last = rec.rows.back();
    j["final"] = {{"t", last.t}, {"lambda", last.lambda}, {"ricci_l2", last.ricci_l2}, {"dist_c2", last.dist_c2}};
  }
  if (rec.final_metric) j["final"]["distance_to_flat_family"] = flow::flat_family_distance(*rec.final_metric);
  j["checks"] = {{"monotonicity_violations", rec.monotonicity_violations},
                 {"identity_violations", rec.identity_violations},
                 {"max_identity_error", rec.max_identity_error},
                 {"perelman_violations", rec.perelman_violations},
                 {"curvature_growth", finite(rec.curvature_growth)}};
  j["decay_fit"] = fit_json(flow::fit_decay(rec));

  double C1 = c.flow.C1, C2 = c.flow.C2;
  std::string source = "config";
  if ((C1 <= 0.0 || C2 <= 0.0) && c.flow.scan_samples > 0) {
    flow::ScanOptions so;
    so.sampler = sampler_options(c.scan);
    so.single_every = c.scan.single_every;
    so.flat_every = c.scan.flat_every;
    const auto rep = flow::lojasiewicz_scan(grid, c.flow.scan_samples, c.seed, so);
    C1 = rep.C1();
    C2 = rep.C2();
    source = "scan";
  }
  if (C1 > 0.0 && C2 > 0.0 && std::isfinite(C1) && std::isfinite(C2)) {
    const auto ed = flow::energy_distance_check(rec, C1, C2);
    j["energy_distance"] = {{"C1", C1},
                            {"C2", C2},
                            {"source", source},
                            {"pass", ed.pass},
                            {"worst_margin", finite(ed.worst_margin)},
                            {"pairs", ed.pairs},
                            {"decay_pass", ed.decay_pass},
                            {"worst_decay_margin", finite(ed.worst_decay_margin)}};
  }
  write_json(dir / "summary.json", j);
  if (rec.final_metric) snapshot::write(dir / "final.lfld", rec.final_metric->g());
  return rec.status == flow::FlowStatus::converged || rec.status == flow::FlowStatus::max_time;
}

// ==== scans ====

void cmd_scan(const ExperimentConfig& c, const fs::path& dir) {
  const auto grid = c.grid.grid();
  const auto& s = c.scan;
  const auto opts = sampler_options(s);
  std::ofstream csv(dir / "scan.csv");
  csv << std::setprecision(17);
  if (s.kind == "lojasiewicz") {
    flow::ScanOptions so;
    so.sampler = opts;
    so.single_every = s.single_every;
    so.flat_every = s.flat_every;
    const auto rep = flow::lojasiewicz_scan(grid, s.samples, c.seed, so);
    json j = json::parse(flow::scan_json(rep));
    if (s.compare_res > 0) {
      GridSpec other = c.grid;
      other.res = s.compare_res;
      const auto rep2 = flow::lojasiewicz_scan(other.grid(), s.samples, c.seed, so);
      j["compare"] = {{"resolution", s.compare_res},
                      {"c_B", finite(rep2.c_B)},
                      {"c_C", finite(rep2.c_C)},
                      {"rel_diff_c_B", finite(std::abs(rep2.c_B - rep.c_B) / std::abs(rep.c_B))},
                      {"rel_diff_c_C", finite(std::abs(rep2.c_C - rep.c_C) / std::abs(rep.c_C))}};
    }
    write_json(dir / "scan.json", j);
    csv << "index,flat_member,single_mode,lambda,gradient_l2f,ricci_l2,ricci_l2f,orthogonality,ratio_b,ratio_c\n";
    for (const auto& r : rep.rows)
      csv << r.index << ',' << r.flat_member << ',' << r.single_mode << ',' << r.lambda << ',' << r.gradient_l2f << ','
          << r.ricci_l2 << ',' << r.ricci_l2f << ',' << r.orthogonality << ',' << r.ratio_b << ',' << r.ratio_c << '\n';
  } else if (s.kind == "lambda_sign") {
    const auto rep = variation::lambda_sign_scan(grid, s.samples, c.seed, opts, s.flat_every);
    write_json(dir / "scan.json", {{"samples", rep.rows.size()},
                                   {"seed", c.seed},
                                   {"max_lambda", finite(rep.max_lambda)},
                                   {"strict_violations", rep.strict_violations},
                                   {"flat_violations", rep.flat_violations}});
    csv << "index,flat_member,lambda,normal_h1\n";
    for (const auto& r : rep.rows) csv << r.index << ',' << r.flat_member << ',' << r.lambda << ',' << r.normal_h1 << '\n';
  } else if (s.kind == "third_variation") {
    const auto rep = variation::third_variation_bound_scan(grid, s.samples, c.seed);
    write_json(dir / "scan.json", {{"samples", rep.rows.size()},
                                   {"seed", c.seed},
                                   {"max_ratio", rep.max_ratio},
                                   {"max_spread", rep.max_spread}});
    csv << "index,s,ratio\n";
    for (const auto& r : rep.rows)
      for (std::size_t i = 0; i < r.s.size(); ++i) csv << r.index << ',' << r.s[i] << ',' << r.ratio[i] << '\n';
  } else {
    const auto p = flow::positive_lambda_probe(grid, s.samples, c.seed, opts);
    write_json(dir / "scan.json", {{"samples", p.samples},
                                   {"seed", c.seed},
                                   {"max_lambda", finite(p.max_lambda)},
                                   {"positive", p.positive}});
    csv << "samples,max_lambda,positive\n" << p.samples << ',' << p.max_lambda << ',' << p.positive << '\n';
  }
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  // stale outputs of an earlier run would end up in the manifest
  for (const char* name : {"resolved-config.json", "summary.json", "w.lfld", "f.lfld", "variations.csv", "flow.csv", "snapshots",
                           "final.lfld", "stability.json", "scan.json", "scan.csv", "error.json", "manifest.json"})
    fs::remove_all(dir / name);
  write_json(dir / "resolved-config.json", to_json(cfg));

  int code = 0;
  try {
    if (command == "lambda") {
      cmd_lambda(cfg, dir);
    } else if (command == "variations") {
      cmd_variations(cfg, dir);
    } else if (command == "flow") {
      if (!cmd_flow(cfg, dir)) {
        code = 1;
        write_json(dir / "error.json", {{"kind", "flow"}, {"message", "flow ended in a numerical failure"}});
      }
    } else if (command == "scan") {
      cmd_scan(cfg, dir);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
  } catch (const NumericalError& e) {
    write_json(dir / "error.json", {{"kind", failure_name(e.kind())}, {"message", e.what()}});
    std::cerr << "lambda-lab: numerical failure (" << failure_name(e.kind()) << "): " << e.what() << '\n';
    code = 1;
  }
  write_manifest(dir, command);
  return code;
}

int report_passthrough(const std::vector<std::string>& args) {
  std::vector<std::string> argv_s{"python3", "-m", "lambda_lab_report"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::cout.flush();
  pid_t pid = 0;
  if (::posix_spawnp(&pid, "python3", nullptr, nullptr, argv.data(), environ) != 0) {
    std::cerr << "lambda-lab: cannot start python3\n";
    return 2;
  }
  int status = 0;
  if (::waitpid(pid, &status, 0) < 0 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::cerr << "lambda-lab: python3 -m lambda_lab_report failed\n";
    return 2;
  }
  return 0;
}

}  // namespace lambda_lab::cli
