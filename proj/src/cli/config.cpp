#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "lambda_lab/cli.hpp"
#include "lambda_lab/decomp.hpp"
#include "lambda_lab/error.hpp"
#include "lambda_lab/flow.hpp"
#include "lambda_lab/manifold.hpp"
#include "lambda_lab/sampling.hpp"
#include "lambda_lab/snapshot.hpp"

namespace lambda_lab::cli {

using json = nlohmann::json;

namespace {

// ==== strict reading ====

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  // reject lossy number conversions (3.5 -> 3) and strings posing as numbers
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(where + "." + key + ": must be >= 0");
  }
  try {
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Term parse_term(const json& j, const std::string& where) {
  check_keys(j, {"kind", "amplitude", "wave", "phase", "matrix", "component", "kmax", "stream"}, where);
  Term t;
  read(j, "kind", t.kind, where);
  read(j, "amplitude", t.amplitude, where);
  read(j, "wave", t.wave, where);
  read(j, "phase", t.phase, where);
  read(j, "matrix", t.matrix, where);
  read(j, "component", t.component, where);
  read(j, "kmax", t.kmax, where);
  read(j, "stream", t.stream, where);
  static const std::set<std::string> kinds{"conformal", "tt", "scale", "constant", "gauge", "random"};
  if (!kinds.count(t.kind)) throw ConfigError(where + ".kind: unknown term kind '" + t.kind + "'");
  if (t.phase != "cos" && t.phase != "sin") throw ConfigError(where + ".phase: expected cos or sin");
  return t;
}

std::vector<Term> parse_terms(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<Term> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_term(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json term_json(const Term& t) {
  return {{"kind", t.kind},         {"amplitude", t.amplitude}, {"wave", t.wave}, {"phase", t.phase},
          {"matrix", t.matrix},     {"component", t.component}, {"kmax", t.kmax}, {"stream", t.stream}};
}

json terms_json(const std::vector<Term>& ts) {
  json a = json::array();
  for (const auto& t : ts) a.push_back(term_json(t));
  return a;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& m, int n, const std::string& where) {
  if (static_cast<int>(m.size()) != n) throw ConfigError(where + ": expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(m[i].size()) != n) throw ConfigError(where + ": ragged matrix");
    for (int j = 0; j < n; ++j) out(i, j) = m[i][j];
  }
  if ((out - out.transpose()).cwiseAbs().maxCoeff() > 0.0) throw ConfigError(where + ": matrix is not symmetric");
  return out;
}

double phase_value(const Term& t, const std::array<double, 3>& x, int n) {
  double ph = 0.0;
  for (int a = 0; a < n; ++a) {
    const int m = t.wave.empty() ? (a == 0 ? 1 : 0) : t.wave[a];
    ph += m * x[a];
  }
  return t.phase == "cos" ? std::cos(ph) : std::sin(ph);
}

SymTensorField term_field(const Term& t, const PeriodicGrid& grid, std::uint64_t seed, const std::string& where) {
  const int n = grid.dim();
  if (!t.wave.empty() && static_cast<int>(t.wave.size()) != n)
    throw ConfigError(where + ".wave: expected " + std::to_string(n) + " entries");
  // phases use 2 pi x / period so that integer waves stay periodic
  auto wave_scalar = [&]() {
    return sample(grid, [&](auto x) {
      std::array<double, 3> y{};
      for (int a = 0; a < n; ++a) y[a] = 2.0 * std::numbers::pi * x[a] / grid.period(a);
      return phase_value(t, y, n);
    });
  };
  const auto flat = MetricField::flat(grid);
  SymTensorField h(grid);
  if (t.kind == "conformal") {
    h = decomp::conformal_op(flat, wave_scalar());
  } else if (t.kind == "tt") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    if (t.matrix.empty()) {
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
    } else {
      m = to_matrix(t.matrix, n, where + ".matrix");
      if (std::abs(m.trace()) > 1e-14) throw ConfigError(where + ".matrix: tt terms must be trace-free");
    }
    h = constant_tensor(grid, m);
  } else if (t.kind == "scale") {
    h = flat.g();
  } else if (t.kind == "constant") {
    h = constant_tensor(grid, to_matrix(t.matrix, n, where + ".matrix"));
  } else if (t.kind == "gauge") {
    if (t.component < 0 || t.component >= n) throw ConfigError(where + ".component: out of range");
    VectorField X(grid);
    const auto u = wave_scalar();
    std::copy(u.data().begin(), u.data().end(), X.component(t.component).begin());
    h = manifold::divergence_adjoint(flat, X);
  } else {
    h = sampling::random_tensor(grid, seed, t.stream, t.kmax);
  }
  h *= t.amplitude;
  return h;
}

flow::Perturbation parse_mode(const std::string& spec, const PeriodicGrid& grid) {
  // "conformal:1,0", "tt", "conformal+tt:0,1"
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  std::vector<int> wave;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        wave.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("flow.modes: bad wave vector in '" + spec + "'");
      }
    }
  }
  if (kind == "tt") return flow::tt_constant(grid);
  if (kind != "conformal" && kind != "conformal+tt") throw ConfigError("flow.modes: unknown mode '" + spec + "'");
  if (static_cast<int>(wave.size()) != grid.dim()) throw ConfigError("flow.modes: '" + spec + "' needs a wave vector");
  auto p = flow::conformal_mode(grid, wave);
  if (kind == "conformal+tt") {
    p.direction += flow::tt_constant(grid).direction;
    p.label = "conformal+tt" + p.label.substr(std::string("conformal").size());
  }
  return p;
}

}  // namespace

// ==== config <-> JSON ====

PeriodicGrid GridSpec::grid() const {
  try {
    return PeriodicGrid(std::vector<int>(dim, res), std::vector<double>(dim, period));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["grid"] = {{"dim", c.grid.dim}, {"res", c.grid.res}, {"period", c.grid.period}};
  j["metric"] = {{"type", c.metric.type},
                 {"matrix", c.metric.matrix},
                 {"terms", terms_json(c.metric.terms)},
                 {"index", c.metric.index},
                 {"path", c.metric.path}};
  j["direction"] = {{"terms", terms_json(c.direction.terms)}, {"path", c.direction.path}};
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["lambda"] = {{"modes", c.lambda.modes}};
  j["variations"] = {{"orders", c.variations.orders}};
  const auto& f = c.flow;
  j["flow"] = {{"dt", f.dt},
               {"kappa", f.kappa},
               {"max_time", f.max_time},
               {"monitor_every", f.monitor_every},
               {"snapshot_every", f.snapshot_every},
               {"gauge", f.gauge},
               {"rc_tol", f.rc_tol},
               {"lambda_tol", f.lambda_tol},
               {"divergence_c2", f.divergence_c2},
               {"C1", f.C1},
               {"C2", f.C2},
               {"scan_samples", f.scan_samples},
               {"stability", f.stability},
               {"amplitudes", f.amplitudes},
               {"modes", f.modes}};
  const auto& s = c.scan;
  j["scan"] = {{"kind", s.kind},   {"samples", s.samples},           {"radius", s.radius},
               {"min_scale", s.min_scale}, {"kmax", s.kmax},         {"kinds", s.kinds},
               {"single_every", s.single_every}, {"flat_every", s.flat_every}, {"compare_res", s.compare_res}};
  return j;
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  check_keys(doc, {"grid", "metric", "direction", "seed", "output", "lambda", "variations", "flow", "scan"}, "config");
  read(doc, "seed", c.seed, "config");
  read(doc, "output", c.output, "config");
  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    check_keys(g, {"dim", "res", "period"}, "grid");
    read(g, "dim", c.grid.dim, "grid");
    read(g, "res", c.grid.res, "grid");
    read(g, "period", c.grid.period, "grid");
    if (c.grid.dim != 2 && c.grid.dim != 3) throw ConfigError("grid.dim: must be 2 or 3");
  }
  if (doc.contains("metric")) {
    const auto& m = doc["metric"];
    check_keys(m, {"type", "matrix", "terms", "index", "path"}, "metric");
    read(m, "type", c.metric.type, "metric");
    read(m, "matrix", c.metric.matrix, "metric");
    if (m.contains("terms")) c.metric.terms = parse_terms(m["terms"], "metric.terms");
    read(m, "index", c.metric.index, "metric");
    read(m, "path", c.metric.path, "metric");
    static const std::set<std::string> types{"flat", "constant", "conformal", "perturbed", "sample", "snapshot"};
    if (!types.count(c.metric.type)) throw ConfigError("metric.type: unknown type '" + c.metric.type + "'");
  }
  if (doc.contains("direction")) {
    const auto& d = doc["direction"];
    check_keys(d, {"terms", "path"}, "direction");
    if (d.contains("terms")) c.direction.terms = parse_terms(d["terms"], "direction.terms");
    read(d, "path", c.direction.path, "direction");
  }
  if (doc.contains("lambda")) {
    check_keys(doc["lambda"], {"modes"}, "lambda");
    read(doc["lambda"], "modes", c.lambda.modes, "lambda");
    if (c.lambda.modes < 2) throw ConfigError("lambda.modes: must be >= 2");
  }
  if (doc.contains("variations")) {
    check_keys(doc["variations"], {"orders"}, "variations");
    read(doc["variations"], "orders", c.variations.orders, "variations");
    for (int o : c.variations.orders)
      if (o < 1 || o > 3) throw ConfigError("variations.orders: orders must be 1, 2 or 3");
  }
  if (doc.contains("flow")) {
    const auto& f = doc["flow"];
    check_keys(f, {"dt", "kappa", "max_time", "monitor_every", "snapshot_every", "gauge", "rc_tol", "lambda_tol",
                   "divergence_c2", "C1", "C2", "scan_samples", "stability", "amplitudes", "modes"},
               "flow");
    auto& p = c.flow;
    read(f, "dt", p.dt, "flow");
    read(f, "kappa", p.kappa, "flow");
    read(f, "max_time", p.max_time, "flow");
    read(f, "monitor_every", p.monitor_every, "flow");
    read(f, "snapshot_every", p.snapshot_every, "flow");
    read(f, "gauge", p.gauge, "flow");
    read(f, "rc_tol", p.rc_tol, "flow");
    read(f, "lambda_tol", p.lambda_tol, "flow");
    read(f, "divergence_c2", p.divergence_c2, "flow");
    read(f, "C1", p.C1, "flow");
    read(f, "C2", p.C2, "flow");
    read(f, "scan_samples", p.scan_samples, "flow");
    read(f, "stability", p.stability, "flow");
    read(f, "amplitudes", p.amplitudes, "flow");
    read(f, "modes", p.modes, "flow");
    try {
      flow::parse_gauge(p.gauge);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("flow.gauge: ") + e.what());
    }
    if (p.monitor_every < 1) throw ConfigError("flow.monitor_every: must be >= 1");
    if (!(p.kappa > 0.0) || p.kappa > 0.2) throw ConfigError("flow.kappa: must be in (0, 0.2]");
  }
  if (doc.contains("scan")) {
    const auto& s = doc["scan"];
    check_keys(s, {"kind", "samples", "radius", "min_scale", "kmax", "kinds", "single_every", "flat_every", "compare_res"},
               "scan");
    auto& p = c.scan;
    read(s, "kind", p.kind, "scan");
    read(s, "samples", p.samples, "scan");
    read(s, "radius", p.radius, "scan");
    read(s, "min_scale", p.min_scale, "scan");
    read(s, "kmax", p.kmax, "scan");
    read(s, "kinds", p.kinds, "scan");
    read(s, "single_every", p.single_every, "scan");
    read(s, "flat_every", p.flat_every, "scan");
    read(s, "compare_res", p.compare_res, "scan");
    static const std::set<std::string> kinds{"lojasiewicz", "lambda_sign", "third_variation", "positive_lambda"};
    if (!kinds.count(p.kind)) throw ConfigError("scan.kind: unknown scan '" + p.kind + "'");
    for (const auto& k : p.kinds) {
      try {
        sampling::parse_kind(k);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("scan.kinds: ") + e.what());
      }
    }
  }
  // fail early on grids the numerics cannot use
  c.grid.grid();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  std::string pointer;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("--set: empty path component in '" + key + "'");
    pointer += "/" + part;
  }
  try {
    doc[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("--set " + key + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
      doc = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + path + "': " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

// ==== recipes ====

MetricField build_metric(const ExperimentConfig& c) {
  const auto grid = c.grid.grid();
  const auto& r = c.metric;
  try {
    if (r.type == "flat") return MetricField::flat(grid);
    if (r.type == "constant") return MetricField::constant(grid, to_matrix(r.matrix, grid.dim(), "metric.matrix"));
    if (r.type == "conformal") {
      ScalarField u(grid);
      for (std::size_t i = 0; i < r.terms.size(); ++i) {
        const auto& t = r.terms[i];
        if (t.kind != "conformal") throw ConfigError("metric.terms: conformal metrics take conformal terms only");
        if (!t.wave.empty() && static_cast<int>(t.wave.size()) != grid.dim())
          throw ConfigError("metric.terms[" + std::to_string(i) + "].wave: wrong length");
        const auto v = sample(grid, [&](auto x) {
          std::array<double, 3> y{};
          for (int a = 0; a < grid.dim(); ++a) y[a] = 2.0 * std::numbers::pi * x[a] / grid.period(a);
          return t.amplitude * phase_value(t, y, grid.dim());
        });
        u += v;
      }
      return MetricField::conformal(u);
    }
    if (r.type == "perturbed") {
      SymTensorField g = MetricField::flat(grid).g();
      for (std::size_t i = 0; i < r.terms.size(); ++i)
        g += term_field(r.terms[i], grid, c.seed, "metric.terms[" + std::to_string(i) + "]");
      return MetricField(std::move(g));
    }
    if (r.type == "sample") {
      return sampling::draw(grid, sampler_options(c.scan), c.seed, r.index).metric();
    }
    const auto g = snapshot::read_metric(r.path);
    if (g.grid().dim() != grid.dim() || g.grid().res(0) != grid.res(0))
      throw ConfigError("metric.path: snapshot grid does not match the configured grid");
    return g;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("metric: ") + e.what());
  }
}

SymTensorField build_direction(const ExperimentConfig& c) {
  const auto grid = c.grid.grid();
  try {
    if (!c.direction.path.empty()) return snapshot::read_tensor(c.direction.path);
    SymTensorField h(grid);
    for (std::size_t i = 0; i < c.direction.terms.size(); ++i)
      h += term_field(c.direction.terms[i], grid, c.seed, "direction.terms[" + std::to_string(i) + "]");
    return h;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("direction: ") + e.what());
  }
}

sampling::SamplerOptions sampler_options(const ScanParams& s) {
  sampling::SamplerOptions o;
  o.radius = s.radius;
  o.min_scale = s.min_scale;
  o.kmax = s.kmax;
  o.kinds.clear();
  for (const auto& k : s.kinds) o.kinds.push_back(sampling::parse_kind(k));
  return o;
}

std::vector<flow::Perturbation> parse_modes(const std::vector<std::string>& specs, const PeriodicGrid& grid) {
  std::vector<flow::Perturbation> out;
  for (const auto& s : specs) out.push_back(parse_mode(s, grid));
  return out;
}

}  // namespace lambda_lab::cli
