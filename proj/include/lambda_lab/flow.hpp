#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lambda_lab/fields.hpp"
#include "lambda_lab/sampling.hpp"

namespace lambda_lab::flow {

// ==== Ricci-DeTurck flow ====

enum class Gauge {
  deturck,  // dg/dt = -2 Rc + L_W g, W^k = g^{ij} Gamma^k_ij against a flat background
  ricci,    // dg/dt = -2 Rc (weakly parabolic; short runs only)
};

std::string to_string(Gauge g);
Gauge parse_gauge(const std::string& name);

/// DeTurck field W_j = g_jk g^{pq} (Gamma^k_pq - bar Gamma^k_pq) as a covector.
/// The background is a constant metric, so bar Gamma = 0.
VectorField deturck_field(const MetricField& g);

/// -2 Rc(g) (+ L_W g for the DeTurck gauge).
SymTensorField flow_velocity(const MetricField& g, Gauge gauge = Gauge::deturck);

/// Largest stable time step kappa h_min^2 / (n max eig g^{-1}) for the
/// explicit RK4 scheme.
double stable_time_step(const MetricField& g, double kappa = 0.2);

/// One classical RK4 step. Throws NumericalError(positivity_loss) if a stage
/// metric fails to be positive definite, InvalidArgument if dt is not in
/// (0, stable_time_step(g)].
MetricField deturck_step(const MetricField& g, double dt, Gauge gauge = Gauge::deturck);

// ==== monitored runs ====

struct FlowConfig {
  double dt = 0.0;              // 0 selects stable_time_step(g0, kappa)
  double kappa = 0.2;
  double max_time = 20.0;
  int monitor_every = 10;       // steps between monitor rows
  double rc_tol = 1e-8;         // convergence: ||Rc||_{L^2} below this
  double lambda_tol = 1e-12;    //   and |lambda| below this
  int converged_rows = 10;      //   for this many consecutive rows
  double divergence_c2 = 0.5;   // ||g - g_ref||_{C^2} beyond this counts as divergence
  double monotone_tol = 1e-8;   // lambda may dip by tol (1 + |lambda|) between rows
  double identity_tol = 1e-3;   // |dlambda/dt - 2||G||^2| relative tolerance
  double noise_floor = 1e-10;   // |rates| below this are compared absolutely
  Gauge gauge = Gauge::deturck;
  int snapshot_every = 0;       // monitor rows between snapshots, 0 = never
  std::uint64_t seed = 0;
};

struct FlowRow {
  int step = 0;
  double t = 0.0;
  double lambda = 0.0;
  double ricci_l2 = 0.0;        // ||Rc||_{L^2}
  double gradient_l2f = 0.0;    // ||Rc + Hess f||_{L^2_f}
  double dist_c0 = 0.0;         // ||g(t) - g_ref||_{C^0}
  double dist_c2 = 0.0;         // ||g(t) - g_ref||_{C^2}
  double lojasiewicz_ratio = 0.0;   // ||Rc + Hess f||_{L^2_f} / |lambda|^{1/2}
  double transversality_ratio = 0.0;  // ||Rc + Hess f||_{L^2_f} / ||Rc||_{L^2}
  double dlambda_dt = 0.0;      // centered difference over one step
  double twice_gradient_sq = 0.0;  // 2 ||Rc + Hess f||^2_{L^2_f}
  double curvature_sup = 0.0;   // max |Rm| over nodes
  double ricci_integral = 0.0;  // int_0^t ||Rc||_{L^2}, trapezoidal over every step
};

enum class FlowStatus { converged, max_time, diverged, positivity_lost, solver_failure };
std::string to_string(FlowStatus s);

struct FlowRecord {
  std::vector<FlowRow> rows;
  FlowStatus status = FlowStatus::max_time;
  std::string message;
  double dt = 0.0;
  std::optional<MetricField> final_metric;
  // checks over the rows
  std::size_t monotonicity_violations = 0;
  std::size_t identity_violations = 0;   // |dlambda/dt - 2||G||^2| above tolerance
  double max_identity_error = 0.0;       // relative, with the noise floor
  std::size_t perelman_violations = 0;   // dlambda/dt < (2/n) lambda^2 - 1e-8
  double curvature_growth = 0.0;         // max_t sup|Rm(t)| / sup|Rm(0)|

  bool converged() const { return status == FlowStatus::converged; }
};

using SnapshotSink = std::function<void(int row, double t, const MetricField& g)>;

/// Integrates from g0 until convergence, divergence or max_time. g_ref is the
/// reference for the distance columns (the flat background by default).
/// Numerical failures are reported through the status, never thrown.
FlowRecord run_flow(const MetricField& g0, const FlowConfig& cfg, const std::optional<MetricField>& g_ref = {},
                    const SnapshotSink& snapshots = {});

/// CSV with a header row; columns as in FlowRow (without step and curvature_sup).
void write_csv(std::ostream& os, const FlowRecord& rec);

// ==== post-run checks ====

struct EnergyDistanceReport {
  bool pass = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // min over pairs of rhs - lhs
  std::size_t pairs = 0;
  // |lambda(t2)| <= exp(-2 (t2 - t1) / C1^2) |lambda(t1)| over all pairs
  bool decay_pass = true;
  double worst_decay_margin = std::numeric_limits<double>::infinity();
};

/// int_{t1}^{t2} ||Rc|| dt <= C1 C2 (|lambda(t1)|^{1/2} - |lambda(t2)|^{1/2}) for all
/// monitor-row pairs. The time integral comes from FlowRow::ricci_integral.
EnergyDistanceReport energy_distance_check(const FlowRecord& rec, double C1, double C2, double tol = 1e-12);

struct DecayFit {
  double rate = 0.0;       // |lambda| ~ A exp(-rate t)
  double intercept = 0.0;  // log A
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares line through log|lambda(t)| over rows with |lambda| above
/// `floor`.
DecayFit fit_decay(const FlowRecord& rec, double floor = 1e-10);

/// Distance in C^0 from g to the closest-in-mean constant metric.
double flat_family_distance(const MetricField& g);

// ==== stability experiment ====

struct Perturbation {
  std::string label;
  SymTensorField direction;  // added as g0 = delta + amplitude * direction
};

/// C u for u = cos(m . x) at the flat metric.
Perturbation conformal_mode(const PeriodicGrid& grid, const std::vector<int>& m);
/// Constant trace-free direction diag(1, -1, 0...).
Perturbation tt_constant(const PeriodicGrid& grid);

struct StabilityRun {
  std::string label;
  double amplitude = 0.0;
  FlowStatus status = FlowStatus::max_time;
  double final_time = 0.0;
  double final_ricci = 0.0;
  double distance_to_delta = 0.0;  // C^0
  double distance_to_flat = 0.0;   // C^0 to the flat family
  DecayFit fit;
  std::string message;
};

struct StabilitySummary {
  std::vector<StabilityRun> runs;
  bool all_converged = true;
  double largest_converged_amplitude = 0.0;
};

StabilitySummary stability_experiment(const PeriodicGrid& grid, const std::vector<double>& amplitudes,
                                      const std::vector<Perturbation>& modes, const FlowConfig& cfg = {});

// ==== Lojasiewicz and transversality scans ====

struct ScanRow {
  std::size_t index = 0;
  bool flat_member = false;
  bool single_mode = false;
  double lambda = 0.0;
  double gradient_l2f = 0.0;
  double ricci_l2 = 0.0;
  double ricci_l2f = 0.0;
  double orthogonality = 0.0;
  double ratio_b = std::numeric_limits<double>::quiet_NaN();  // ||G||_{L^2_f} / |lambda|^{1/2}
  double ratio_c = std::numeric_limits<double>::quiet_NaN();  // ||G||_{L^2_f} / ||Rc||_{L^2}
};

struct ScanReport {
  std::vector<ScanRow> rows;
  std::uint64_t seed = 0;
  int resolution = 0;
  double c_B = std::numeric_limits<double>::infinity();
  double c_C = std::numeric_limits<double>::infinity();
  std::size_t excluded_b = 0;  // |lambda| below the noise floor
  std::size_t excluded_c = 0;  // ||Rc|| below the noise floor
  std::size_t ordering_violations = 0;   // ||G||_{L^2_f} > ||Rc||_{L^2_f} + 1e-8
  double max_orthogonality = 0.0;      // max |<Hess f, G>_{L^2_f}| / ||Rc||^2_{L^2}

  double C1() const { return 1.0 / c_B; }
  double C2() const { return 1.0 / c_C; }
};

struct ScanOptions {
  sampling::SamplerOptions sampler{.radius = 0.05, .min_scale = 0.1, .kmax = 3,
                                   .kinds = {sampling::Kind::gauge, sampling::Kind::conformal, sampling::Kind::tt}};
  std::size_t flat_every = 0;       // every n-th sample drawn from the flat family, 0 = never
  std::size_t single_every = 4;     // every n-th sample built from single Fourier modes, 0 = never
  double lambda_floor = 1e-10;
  double ricci_floor = 1e-8;
};

/// Empirical constants c_B = min ||G||_{L^2_f} / |lambda|^{1/2} and
/// c_C = min ||G||_{L^2_f} / ||Rc||_{L^2} over seeded samples, G = Rc + Hess f.
ScanReport lojasiewicz_scan(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                            const ScanOptions& opts = {});

/// ScanReport JSON {c_B, c_C, C1, C2, samples, seed, excluded, ...}.
std::string scan_json(const ScanReport& rep);

/// Diagnostic from the instability argument: looks for g0 near the flat
/// torus with lambda(g0) > 0. None should exist.
struct PositiveLambdaProbe {
  std::size_t samples = 0;
  double max_lambda = -std::numeric_limits<double>::infinity();
  std::size_t positive = 0;  // lambda > noise floor
};

PositiveLambdaProbe positive_lambda_probe(const PeriodicGrid& grid, std::size_t samples, std::uint64_t seed,
                                          const sampling::SamplerOptions& opts = {}, double floor = 1e-10);

}  // namespace lambda_lab::flow
