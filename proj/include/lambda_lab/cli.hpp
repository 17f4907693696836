#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lambda_lab/fields.hpp"
#include "lambda_lab/flow.hpp"
#include "lambda_lab/sampling.hpp"

namespace lambda_lab::cli {

// ==== configuration ====

struct GridSpec {
  int dim = 2;
  int res = 33;
  double period = 6.283185307179586;

  PeriodicGrid grid() const;
};

/// One additive term of a tensor recipe.
///   conformal  C u with u = cos/sin(wave . x)
///   tt         a constant trace-free matrix (default diag(1, -1, 0...))
///   scale      the metric delta itself
///   constant   an arbitrary constant symmetric matrix
///   gauge      div* X with X_component = cos/sin(wave . x)
///   random     a seeded low-mode symmetric tensor
struct Term {
  std::string kind = "conformal";
  double amplitude = 1.0;
  std::vector<int> wave;                      // empty = (1, 0, ...)
  std::string phase = "cos";                  // cos | sin
  std::vector<std::vector<double>> matrix;    // tt / constant
  int component = 0;                          // gauge
  int kmax = 3;                               // random
  std::uint64_t stream = 1;                   // random
};

/// The base metric g.
///   flat       delta
///   constant   a constant matrix
///   conformal  e^{2u} delta, u = sum of terms' amplitude cos/sin(wave . x)
///   perturbed  delta + sum of terms
///   sample     the sampler's draw(seed, index)
///   snapshot   an LFLD metric file
struct MetricRecipe {
  std::string type = "flat";
  std::vector<std::vector<double>> matrix;
  std::vector<Term> terms;
  std::size_t index = 0;
  std::string path;
};

/// The direction h of the variations (sum of terms or an LFLD file).
struct DirectionRecipe {
  std::vector<Term> terms{Term{}};
  std::string path;
};

struct LambdaParams {
  int modes = 4;
};

struct VariationParams {
  std::vector<int> orders{1, 2, 3};
};

struct FlowParams {
  double dt = 0.0;
  double kappa = 0.2;
  double max_time = 20.0;
  int monitor_every = 10;
  int snapshot_every = 0;
  std::string gauge = "deturck";
  double rc_tol = 1e-8;
  double lambda_tol = 1e-12;
  double divergence_c2 = 0.5;
  /// Constants for the energy-distance check; <= 0 means scan them
  /// (scan_samples samples, seed = config seed) unless scan_samples is 0.
  double C1 = 0.0;
  double C2 = 0.0;
  std::size_t scan_samples = 500;
  /// Stability experiment instead of a single run.
  bool stability = false;
  std::vector<double> amplitudes{0.01, 0.02, 0.04};
  std::vector<std::string> modes{"conformal:1,0", "conformal:1,1", "conformal+tt:0,1"};
};

struct ScanParams {
  std::string kind = "lojasiewicz";  // lojasiewicz | lambda_sign | third_variation | positive_lambda
  std::size_t samples = 500;
  double radius = 0.05;
  double min_scale = 0.1;
  int kmax = 3;
  std::vector<std::string> kinds{"gauge", "conformal", "tt"};
  std::size_t single_every = 4;
  std::size_t flat_every = 0;
  int compare_res = 0;  // lojasiewicz: rerun on a second grid and compare the constants
};

struct ExperimentConfig {
  GridSpec grid;
  MetricRecipe metric;
  DirectionRecipe direction;
  std::uint64_t seed = 42;
  std::string output = "lambda-lab-out";
  LambdaParams lambda;
  VariationParams variations;
  FlowParams flow;
  ScanParams scan;
};

nlohmann::json to_json(const ExperimentConfig& c);

/// Strict parse: unknown keys and wrong types throw ConfigError naming the
/// offending path. Missing keys keep their defaults.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Applies "a.b.c=value" (value parsed as JSON, else taken as a string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the document at `path` (empty: {}), applies the overrides, parses.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

MetricField build_metric(const ExperimentConfig& c);
SymTensorField build_direction(const ExperimentConfig& c);
sampling::SamplerOptions sampler_options(const ScanParams& s);
/// "conformal:1,0", "tt", "conformal+tt:0,1".
std::vector<flow::Perturbation> parse_modes(const std::vector<std::string>& specs, const PeriodicGrid& grid);

// ==== output ====

std::string sha256_hex(const std::filesystem::path& file);

/// Writes manifest.json listing every other file of `dir` with its size and
/// SHA-256, sorted by path.
void write_manifest(const std::filesystem::path& dir, const std::string& command);

// ==== commands ====

/// Runs one command (lambda | variations | flow | scan) into cfg.output and
/// returns the process exit code (0 success, 1 numerical failure).
int run_command(const std::string& command, const ExperimentConfig& cfg);

/// Execs `python3 -m lambda_lab_report args...`; returns 2 if that fails.
int report_passthrough(const std::vector<std::string>& args);

}  // namespace lambda_lab::cli
