#include "mvjump/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

#include "mvjump/errors.hpp"
#include "mvjump/estimators.hpp"
#include "mvjump/io.hpp"
#include "mvjump/metrics.hpp"
#include "mvjump/particle_engine.hpp"
#include "mvjump/tail.hpp"

namespace mvjump {

using nlohmann::json;

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"simulate",          "density",        "tv-estimate",
                                              "convergence-study", "validate-model", "tail-quantities"};
  return names;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

// Reads the keys of one JSON object and rejects any key left unread.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) field_error(at(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) field_error(at(key), "must be finite");
    }
  }
  void number(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      double x = 0.0;
      number(key, x);
      out = x;
    }
  }
  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) field_error(at(key), "expected an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) field_error(at(key), "too large");
        out = static_cast<Int>(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if (s < 0 && !std::is_signed_v<Int>) field_error(at(key), "must be >= 0 (got " + std::to_string(s) + ")");
        out = static_cast<Int>(s);
      }
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) field_error(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) field_error(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  /// Numbers; null stands for `null_as` (used for infinite box bounds).
  void numbers(const std::string& key, Vec& out, std::optional<double> null_as = {}) {
    if (const json* v = find(key)) {
      if (!v->is_array()) field_error(at(key), "expected an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (e.is_null() && null_as) {
          out.push_back(*null_as);
        } else if (e.is_number()) {
          out.push_back(e.get<double>());
        } else {
          field_error(at(key), "expected an array of numbers");
        }
      }
    }
  }
  void counts(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) field_error(at(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned()) field_error(at(key), "expected an array of positive integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  void params(const std::string& key, ParamMap& out) {
    if (const json* v = find(key)) {
      Fields sub(*v, at(key));
      for (const auto& [name, value] : v->items()) {
        if (!value.is_number()) field_error(sub.at(name), "expected a number");
        out[name] = value.get<double>();
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) field_error(at(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json params_json(const ParamMap& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

void read_model(const json& j, ModelChoice& m) {
  Fields f(j, "model");
  f.string("measure", m.measure);
  f.params("measure_params", m.measure_params);
  f.string("drift", m.drift);
  f.params("drift_params", m.drift_params);
  f.string("jump", m.jump);
  f.params("jump_params", m.jump_params);
  f.string("envelopes", m.envelopes);
  f.integer("max_ring", m.max_ring);
  f.finish();
}

void read_simulation(const json& j, SimulationSpec& s) {
  Fields f(j, "simulation");
  f.number("T", s.T);
  f.number("step", s.step);
  f.integer("M", s.M);
  f.integer("N", s.N);
  if (const json* init = f.find("initial")) {
    Fields g(*init, "simulation.initial");
    g.string("kind", s.initial.kind);
    g.numbers("mean", s.initial.mean);
    g.numbers("cov", s.initial.cov);
    g.string("path", s.initial.path);
    g.finish();
  }
  f.numbers("record_times", s.record_times);
  f.string("snapshot_format", s.snapshot_format);
  f.boolean("sample_jump_times", s.sample_jump_times);
  f.finish();
}

void read_estimator(const json& j, EstimatorSpec& e) {
  Fields f(j, "estimator");
  f.string("rule", e.rule);
  f.number("epsilon", e.epsilon);
  f.integer("particles", e.particles);
  f.integer("max_particles", e.max_particles);
  f.integer("repetitions", e.repetitions);
  if (const json* grid = f.find("grid")) {
    Fields g(*grid, "estimator.grid");
    g.numbers("lower", e.grid_lower);
    g.numbers("upper", e.grid_upper);
    g.counts("points", e.grid_points);
    g.finish();
  }
  if (const json* fns = f.find("functions")) {
    if (!fns->is_array()) field_error("estimator.functions", "expected an array");
    e.functions.clear();
    for (std::size_t k = 0; k < fns->size(); ++k) {
      Fields g((*fns)[k], "estimator.functions[" + std::to_string(k) + "]");
      TestFunctionSpec t;
      g.string("kind", t.kind);
      g.numbers("lower", t.lower, -kInf);
      g.numbers("upper", t.upper, kInf);
      g.number("value", t.value);
      g.finish();
      e.functions.push_back(std::move(t));
    }
  }
  f.integer("gauss_budget", e.gauss_budget);
  f.finish();
}

void read_convergence(const json& j, ConvergenceSpec& c) {
  Fields f(j, "convergence");
  f.number("coarse_step", c.coarse_step);
  f.integer("levels", c.levels);
  f.integer("seeds", c.seeds);
  f.string("reference", c.reference);
  f.number("target_slope", c.target_slope);
  f.number("tolerance", c.tolerance);
  f.number("min_slope", c.min_slope);
  f.integer("directions", c.directions);
  f.finish();
}

void read_validation(const json& j, ValidationSpec& v) {
  Fields f(j, "validation");
  f.integer("sample_budget", v.sample_budget);
  f.boolean("theta", v.theta);
  f.finish();
}

bool is_tv(const std::string& scenario) { return scenario == "tv-estimate"; }

std::string default_rule(const std::string& scenario) { return is_tv(scenario) ? "tv-plain" : "density-plain"; }

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) field_error(field, what);
}

// Range checks shared by parsed and programmatic configs.  Returns the model
// dimension.
std::size_t validate(const ScenarioConfig& c) {
  require(c.schema_version == kSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(c.schema_version) + " (expected " +
              std::to_string(kSchemaVersion) + ")");
  const auto& names = scenario_names();
  if (std::find(names.begin(), names.end(), c.scenario) == names.end()) {
    field_error("scenario", "unknown scenario '" + c.scenario + "' (expected one of " + join(names) + ")");
  }
  require(c.threads >= 1 && c.threads <= 1024, "threads", "must be in [1, 1024]");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");

  const auto& m = c.model;
  const auto mnames = measure_names();
  if (std::find(mnames.begin(), mnames.end(), m.measure) == mnames.end()) {
    field_error("model.measure", "unknown measure '" + m.measure + "' (expected one of " + join(mnames) + ")");
  }
  const auto dnames = drift_names();
  if (std::find(dnames.begin(), dnames.end(), m.drift) == dnames.end()) {
    field_error("model.drift", "unknown drift '" + m.drift + "' (expected one of " + join(dnames) + ")");
  }
  const auto jnames = jump_names();
  if (std::find(jnames.begin(), jnames.end(), m.jump) == jnames.end()) {
    field_error("model.jump", "unknown jump '" + m.jump + "' (expected one of " + join(jnames) + ")");
  }
  require(m.envelopes == "measure" || m.envelopes == "zero", "model.envelopes", "expected 'measure' or 'zero'");
  require(m.max_ring >= 1 && m.max_ring <= 4096, "model.max_ring", "must be in [1, 4096]");
  merge_params("model.measure_params", measure_defaults(m.measure), m.measure_params);
  merge_params("model.drift_params", drift_defaults(m.drift), m.drift_params);
  merge_params("model.jump_params", jump_defaults(m.jump), m.jump_params);
  const std::size_t d = measure_dimension(m.measure, m.measure_params);

  const auto& s = c.simulation;
  require(s.T > 0.0, "simulation.T", "must be > 0");
  require(s.step > 0.0 && s.step <= s.T, "simulation.step", "must be in (0, T]");
  require(s.M >= 1 && s.M <= m.max_ring, "simulation.M", "must be in [1, model.max_ring]");
  require(s.N >= 1, "simulation.N", "must be >= 1");
  for (double t : s.record_times) require(t >= 0.0 && t <= s.T, "simulation.record_times", "times must lie in [0, T]");
  require(s.snapshot_format == "csv" || s.snapshot_format == "binary" || s.snapshot_format == "both",
          "simulation.snapshot_format", "expected csv, binary or both");
  const auto& init = s.initial;
  if (init.kind == "point" || init.kind == "gaussian") {
    require(init.mean.empty() || init.mean.size() == d, "simulation.initial.mean", "must have d entries");
    if (init.kind == "gaussian") {
      require(init.cov.size() == d * d, "simulation.initial.cov", "must have d*d entries");
    } else {
      require(init.cov.empty(), "simulation.initial.cov", "only for kind 'gaussian'");
    }
    require(init.path.empty(), "simulation.initial.path", "only for kind 'samples'");
  } else if (init.kind == "samples") {
    require(!init.path.empty(), "simulation.initial.path", "required for kind 'samples'");
  } else {
    field_error("simulation.initial.kind", "expected point, gaussian or samples");
  }

  const auto& e = c.estimator;
  if (!e.rule.empty()) {
    const Rule rule = parse_rule(e.rule);
    const bool tv_rule = rule == Rule::TvPlain || rule == Rule::TvRomberg;
    if (c.scenario == "density") require(!tv_rule, "estimator.rule", "density needs density-plain or density-romberg");
    if (is_tv(c.scenario)) require(tv_rule, "estimator.rule", "tv-estimate needs tv-plain or tv-romberg");
  }
  if (e.epsilon) require(*e.epsilon > 0.0 && *e.epsilon < 1.0, "estimator.epsilon", "must be in (0, 1)");
  require(e.repetitions >= 1, "estimator.repetitions", "must be >= 1");
  require(e.max_particles >= 1, "estimator.max_particles", "must be >= 1");
  require(e.gauss_budget >= 2, "estimator.gauss_budget", "must be >= 2");
  if (!e.grid_lower.empty() || !e.grid_upper.empty() || !e.grid_points.empty()) {
    require(e.grid_lower.size() == d && e.grid_upper.size() == d && e.grid_points.size() == d,
            "estimator.grid", "lower, upper and points need d entries each");
    for (std::size_t j = 0; j < d; ++j) {
      require(e.grid_lower[j] <= e.grid_upper[j], "estimator.grid", "lower must not exceed upper");
      require(e.grid_points[j] >= 1 && e.grid_points[j] <= 100000, "estimator.grid.points", "must be in [1, 100000]");
      require(e.grid_points[j] == 1 || e.grid_lower[j] < e.grid_upper[j], "estimator.grid",
              "several points need lower < upper");
    }
  }
  for (std::size_t k = 0; k < e.functions.size(); ++k) {
    const auto& f = e.functions[k];
    const std::string field = "estimator.functions[" + std::to_string(k) + "]";
    if (f.kind == "box") {
      require(f.lower.size() == d && f.upper.size() == d, field, "box bounds need d entries");
      for (std::size_t j = 0; j < d; ++j) require(f.lower[j] <= f.upper[j], field, "lower bound above upper");
    } else if (f.kind != "constant" && f.kind != "cos") {
      field_error(field + ".kind", "expected box, constant or cos");
    }
  }

  const auto& v = c.convergence;
  require(v.coarse_step > 0.0 && v.coarse_step <= s.T, "convergence.coarse_step", "must be in (0, T]");
  require(v.levels >= 4 && v.levels <= 16, "convergence.levels", "must be in [4, 16]");
  require(v.seeds >= 1, "convergence.seeds", "must be >= 1");
  require(v.reference == "successive" || v.reference == "finest", "convergence.reference",
          "expected 'successive' or 'finest'");
  require(v.tolerance >= 0.0, "convergence.tolerance", "must be >= 0");
  require(v.directions >= 1, "convergence.directions", "must be >= 1");
  require(c.validation.sample_budget >= 1, "validation.sample_budget", "must be >= 1");
  return d;
}

json test_function_json(const TestFunctionSpec& f) {
  json j{{"kind", f.kind}};
  if (f.kind == "box") {
    j["lower"] = f.lower;  // infinities serialize as null
    j["upper"] = f.upper;
  }
  if (f.kind == "constant") j["value"] = f.value;
  return j;
}

}  // namespace

json ScenarioConfig::to_json() const {
  const auto& s = simulation;
  json init{{"kind", s.initial.kind}};
  if (s.initial.kind != "samples") init["mean"] = s.initial.mean;
  if (s.initial.kind == "gaussian") init["cov"] = s.initial.cov;
  if (s.initial.kind == "samples") init["path"] = s.initial.path;
  json fns = json::array();
  for (const auto& f : estimator.functions) fns.push_back(test_function_json(f));
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {
      {"schema_version", schema_version},
      {"scenario", scenario},
      {"seed", seed},
      {"threads", threads},
      {"output_dir", output_dir},
      {"model",
       {{"measure", model.measure},
        {"measure_params", params_json(model.measure_params)},
        {"drift", model.drift},
        {"drift_params", params_json(model.drift_params)},
        {"jump", model.jump},
        {"jump_params", params_json(model.jump_params)},
        {"envelopes", model.envelopes},
        {"max_ring", model.max_ring}}},
      {"simulation",
       {{"T", s.T},
        {"step", s.step},
        {"M", s.M},
        {"N", s.N},
        {"initial", init},
        {"record_times", s.record_times},
        {"snapshot_format", s.snapshot_format},
        {"sample_jump_times", s.sample_jump_times}}},
      {"estimator",
       {{"rule", estimator.rule},
        {"epsilon", opt(estimator.epsilon)},
        {"particles", estimator.particles},
        {"max_particles", estimator.max_particles},
        {"repetitions", estimator.repetitions},
        {"grid", {{"lower", estimator.grid_lower}, {"upper", estimator.grid_upper}, {"points", estimator.grid_points}}},
        {"functions", fns},
        {"gauss_budget", estimator.gauss_budget}}},
      {"convergence",
       {{"coarse_step", convergence.coarse_step},
        {"levels", convergence.levels},
        {"seeds", convergence.seeds},
        {"reference", convergence.reference},
        {"target_slope", opt(convergence.target_slope)},
        {"tolerance", convergence.tolerance},
        {"min_slope", opt(convergence.min_slope)},
        {"directions", convergence.directions}}},
      {"validation", {{"sample_budget", validation.sample_budget}, {"theta", validation.theta}}},
  };
}

ScenarioConfig config_from_json(const json& j) {
  if (j.is_object() && j.contains("manifest_version")) {
    if (!j.contains("config")) field_error("config", "manifest has no config");
    return config_from_json(j.at("config"));
  }
  ScenarioConfig c;
  Fields f(j, "");
  const json* version = f.find("schema_version");
  if (!version) field_error("schema_version", "required");
  f.integer("schema_version", c.schema_version);
  f.string("scenario", c.scenario);
  if (c.scenario.empty()) field_error("scenario", "required");
  f.integer("seed", c.seed);
  f.integer("threads", c.threads);
  f.string("output_dir", c.output_dir);
  if (const json* v = f.find("model")) read_model(*v, c.model);
  if (const json* v = f.find("simulation")) read_simulation(*v, c.simulation);
  if (const json* v = f.find("estimator")) read_estimator(*v, c.estimator);
  if (const json* v = f.find("convergence")) read_convergence(*v, c.convergence);
  if (const json* v = f.find("validation")) read_validation(*v, c.validation);
  f.finish();
  validate(c);
  return c;
}

ScenarioConfig parse_config(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("config: empty input");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + at, '\n'));
    const std::size_t bol = text.rfind('\n', at == 0 ? 0 : at - 1);
    const std::size_t column = at - (bol == std::string::npos ? 0 : bol + 1) + 1;
    throw ConfigError("config: line " + std::to_string(line) + ", column " + std::to_string(column) +
                      ": malformed JSON");
  }
  return config_from_json(j);
}

ScenarioConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---- pipelines ---------------------------------------------------------------

namespace {

class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path add(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  void write_json(const std::string& name, const json& j) {
    const auto path = add(name);
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }
  std::ofstream open_text(const std::string& name) {
    const auto path = add(name);
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

struct Context {
  const ScenarioConfig& config;
  ModelBundle model;
  std::size_t d;
  Outputs& out;
};

InitialLaw initial_law(const SimulationSpec& s, std::size_t d) {
  const auto& i = s.initial;
  if (i.kind == "samples") {
    Positions rows = read_snapshot_csv(i.path);
    if (rows.dim() != d) throw ConfigError("simulation.initial.path: samples have the wrong dimension");
    return InitialLaw::samples(std::move(rows));
  }
  Vec mean = i.mean.empty() ? Vec(d, 0.0) : i.mean;
  if (i.kind == "gaussian") return InitialLaw::gaussian(std::move(mean), i.cov);
  return InitialLaw::point(std::move(mean));
}

SimConfig sim_config(const Context& ctx, Partition partition, std::size_t N, std::uint64_t seed) {
  const auto& s = ctx.config.simulation;
  SimConfig c;
  c.partition = std::move(partition);
  c.M = s.M;
  c.N = N;
  c.seed = seed;
  c.levy = ctx.model.levy;
  c.coeffs = ctx.model.coeffs;
  c.initial = initial_law(s, ctx.d);
  c.threads = ctx.config.threads;
  c.sample_jump_times = s.sample_jump_times;
  return c;
}

std::string time_label(double t) { return format_double(t); }

json tail_json(const TailQuantities& q) {
  return {{"M", q.M}, {"T", q.T}, {"a_M_T", q.a_M_T}, {"eps_M", q.eps_M}, {"quadrature_abs_tol", q.quadrature_abs_tol}};
}

json params_to_json(const EstimatorParams& p) {
  json j{{"rule", rule_name(p.rule)},
         {"d", p.d},
         {"base", p.base},
         {"delta", p.delta},
         {"vn_bound", p.vn_bound},
         {"n_required", p.n_required},
         {"base_above_one", p.base_above_one}};
  j["epsilon"] = p.epsilon ? json(*p.epsilon) : json(nullptr);
  return j;
}

void run_simulate(Context& ctx) {
  const auto& s = ctx.config.simulation;
  SimConfig c = sim_config(ctx, Partition::uniform(s.T, s.step), s.N, ctx.config.seed);
  const std::vector<double> times = s.record_times.empty() ? std::vector<double>{s.T} : s.record_times;
  const auto result = run_simulation(c, times);
  json snaps = json::array();
  for (const auto& [t, x] : result.snapshots) {
    const std::string stem = "snapshot_t" + time_label(t);
    if (s.snapshot_format != "binary") write_snapshot_csv(ctx.out.add(stem + ".csv"), x);
    if (s.snapshot_format != "csv") write_snapshot_binary(ctx.out.add(stem + ".bin"), x, t);
    snaps.push_back({{"time", t}, {"stem", stem}});
  }
  ctx.out.write_json("summary.json", {{"N", c.N},
                                      {"d", ctx.d},
                                      {"steps", c.partition.steps()},
                                      {"max_step", c.partition.max_step()},
                                      {"total_events", result.total_events},
                                      {"tail_sigma", result.tail_sigma},
                                      {"snapshots", snaps}});
}

// Particle count for an estimator run: explicit, or the rule's minimum.
std::size_t estimator_particles(const EstimatorSpec& e, const EstimatorParams& p) {
  if (e.particles > 0) return e.particles;
  if (p.n_required > e.max_particles) {
    throw ConfigError("estimator: the rule needs N = " + std::to_string(p.n_required) +
                      " particles, above estimator.max_particles = " + std::to_string(e.max_particles) +
                      "; raise max_particles or set estimator.particles");
  }
  return p.n_required;
}

Positions default_grid(const EstimatorSpec& e, std::size_t d) {
  Vec lo = e.grid_lower, hi = e.grid_upper;
  std::vector<std::size_t> pts = e.grid_points;
  if (lo.empty()) {
    lo.assign(d, -4.0);
    hi.assign(d, 4.0);
    pts.assign(d, d == 1 ? 161 : d == 2 ? 41 : 11);
  }
  std::size_t total = 1;
  for (std::size_t n : pts) total *= n;
  Positions g(total, d);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t code = k;
    // Last coordinate varies fastest.
    for (std::size_t j = d; j-- > 0;) {
      const std::size_t idx = code % pts[j];
      code /= pts[j];
      g.row(k)[j] = pts[j] == 1 ? lo[j] : lo[j] + (hi[j] - lo[j]) * static_cast<double>(idx) / static_cast<double>(pts[j] - 1);
    }
  }
  return g;
}

// Mean and standard error over repetitions of a vector-valued estimate.
struct RepeatStats {
  std::vector<double> mean, std_error;
};

RepeatStats repeat_stats(const std::vector<std::vector<double>>& reps) {
  RepeatStats st;
  const std::size_t R = reps.size(), G = reps.front().size();
  st.mean.assign(G, 0.0);
  st.std_error.assign(G, 0.0);
  for (const auto& r : reps) {
    for (std::size_t g = 0; g < G; ++g) st.mean[g] += r[g] / static_cast<double>(R);
  }
  if (R > 1) {
    for (std::size_t g = 0; g < G; ++g) {
      double s = 0.0;
      for (const auto& r : reps) s += (r[g] - st.mean[g]) * (r[g] - st.mean[g]);
      st.std_error[g] = std::sqrt(s / static_cast<double>(R - 1) / static_cast<double>(R));
    }
  }
  return st;
}

void run_density(Context& ctx) {
  const auto& s = ctx.config.simulation;
  const auto& e = ctx.config.estimator;
  const Rule rule = parse_rule(e.rule.empty() ? default_rule("density") : e.rule);
  const Partition partition = Partition::uniform(s.T, s.step);
  const auto tq = tail_quantities(*ctx.model.levy, ctx.model.coeffs, s.M, s.T);
  const auto params = select_density_params(partition.max_step(), tq.eps_M, ctx.d, rule == Rule::DensityRomberg);
  const std::size_t N = estimator_particles(e, params);
  const Positions grid = default_grid(e, ctx.d);

  std::vector<std::vector<double>> reps;
  for (std::size_t r = 0; r < e.repetitions; ++r) {
    const auto run = run_simulation(sim_config(ctx, partition, N, ctx.config.seed + r), {s.T});
    reps.push_back(kde_estimate(run.snapshots.at(s.T), grid, params.delta, params.romberg(), ctx.config.threads).values);
  }
  const auto st = repeat_stats(reps);
  DensityEstimate est;
  est.grid = grid;
  est.values = st.mean;
  est.delta = params.delta;
  est.romberg = params.romberg();
  est.N = N;
  for (double v : est.values) est.negative_values += v < 0.0;
  est.write_csv(ctx.out.add("density.csv"));
  if (e.repetitions > 1) {
    auto out = ctx.out.open_text("density_std_error.csv");
    for (std::size_t j = 0; j < ctx.d; ++j) out << 'x' << j + 1 << ',';
    out << "std_error\n";
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (double x : grid.row(g)) out << format_double(x) << ',';
      out << format_double(st.std_error[g]) << '\n';
    }
  }
  ctx.out.write_json("density.json", {{"params", params_to_json(params)},
                                      {"abs_P", partition.max_step()},
                                      {"tail", tail_json(tq)},
                                      {"N", N},
                                      {"repetitions", e.repetitions},
                                      {"grid_points", grid.size()},
                                      {"negative_values", est.negative_values}});
}

std::vector<TestFunctionSpec> default_functions(std::size_t d) {
  TestFunctionSpec half{"box", Vec(d, -kInf), Vec(d, 0.0), 1.0};
  TestFunctionSpec cube{"box", Vec(d, -1.0), Vec(d, 1.0), 1.0};
  TestFunctionSpec one{"constant", {}, {}, 1.0};
  TestFunctionSpec wave{"cos", {}, {}, 1.0};
  return {half, cube, one, wave};
}

std::string function_label(const TestFunctionSpec& f) {
  if (f.kind == "constant") return "constant(" + format_double(f.value) + ")";
  if (f.kind == "cos") return "cos";
  std::string s = "box";
  for (std::size_t j = 0; j < f.lower.size(); ++j) {
    s += (j ? "x[" : "[") + format_double(f.lower[j]) + ";" + format_double(f.upper[j]) + "]";
  }
  return s;
}

TestFunction make_test_function(const TestFunctionSpec& f) {
  if (f.kind == "constant") return TestFunction::constant(f.value);
  if (f.kind == "box") return TestFunction::box(f.lower, f.upper);
  return TestFunction::general(
      [](Point x) {
        double s = 0.0;
        for (double v : x) s += std::cos(v);
        return s;
      },
      1.0, "cos");
}

void run_tv(Context& ctx) {
  const auto& s = ctx.config.simulation;
  const auto& e = ctx.config.estimator;
  const Rule rule = parse_rule(e.rule.empty() ? default_rule("tv-estimate") : e.rule);
  const double epsilon = e.epsilon.value_or(0.5);
  const Partition partition = Partition::uniform(s.T, s.step);
  const auto tq = tail_quantities(*ctx.model.levy, ctx.model.coeffs, s.M, s.T);
  const auto params = select_tv_params(partition.max_step(), tq.eps_M, ctx.d, epsilon, rule == Rule::TvRomberg);
  const std::size_t N = estimator_particles(e, params);
  const auto specs = e.functions.empty() ? default_functions(ctx.d) : e.functions;

  std::vector<std::vector<double>> reps;
  for (std::size_t r = 0; r < e.repetitions; ++r) {
    const auto run = run_simulation(sim_config(ctx, partition, N, ctx.config.seed + r), {s.T});
    const Positions& X = run.snapshots.at(s.T);
    std::vector<double> values;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      SmoothingOptions opt;
      opt.gauss_budget = e.gauss_budget;
      opt.seed = ctx.config.seed + r;
      values.push_back(smoothed_expectation(X, make_test_function(specs[k]), params.delta, params.romberg(), opt));
    }
    reps.push_back(std::move(values));
  }
  const auto st = repeat_stats(reps);
  auto csv = ctx.out.open_text("tv.csv");
  csv << "function,value,std_error,method,delta,N\n";
  json rows = json::array();
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const std::string method = specs[k].kind == "cos" ? "monte-carlo" : "closed-form";
    csv << '"' << function_label(specs[k]) << "\"," << format_double(st.mean[k]) << ','
        << format_double(st.std_error[k]) << ',' << method << ',' << format_double(params.delta) << ',' << N
        << '\n';
    rows.push_back({{"function", test_function_json(specs[k])},
                    {"label", function_label(specs[k])},
                    {"value", st.mean[k]},
                    {"std_error", st.std_error[k]},
                    {"method", method}});
  }
  ctx.out.write_json("tv.json", {{"params", params_to_json(params)},
                                 {"abs_P", partition.max_step()},
                                 {"tail", tail_json(tq)},
                                 {"N", N},
                                 {"repetitions", e.repetitions},
                                 {"estimates", rows},
                                 {"note", "smoothed-TV proxy: smoothed expectations of a fixed bounded test battery"}});
}

void run_convergence(Context& ctx) {
  const auto& s = ctx.config.simulation;
  const auto& v = ctx.config.convergence;
  const auto n0 = static_cast<std::size_t>(std::ceil(s.T / v.coarse_step * (1.0 - 1e-12)));
  const std::size_t L = v.levels;
  const bool finest = v.reference == "finest";
  const std::size_t rungs = L - 1;
  std::vector<std::vector<double>> errors(v.seeds, std::vector<double>(rungs));
  std::string w1_method;
  W1Options w1;
  w1.directions = v.directions;
  w1.seed = ctx.config.seed;
  w1.threads = ctx.config.threads;
  for (std::size_t k = 0; k < v.seeds; ++k) {
    std::vector<Positions> finals;
    for (std::uint32_t j = 0; j < L; ++j) {
      SimConfig c = sim_config(ctx, Partition::uniform_steps(s.T, n0, j), s.N, ctx.config.seed + k);
      finals.push_back(run_simulation(c, {s.T}).snapshots.at(s.T));
    }
    for (std::size_t j = 0; j < rungs; ++j) {
      const auto r = wasserstein1(finals[j], finest ? finals[L - 1] : finals[j + 1], w1);
      errors[k][j] = r.value;
      w1_method = r.method();
    }
  }
  // The finest-reference ladder compares the last rung with itself: drop it.
  const std::size_t used = finest ? rungs - 1 : rungs;
  std::vector<std::pair<double, double>> ladder;
  auto csv = ctx.out.open_text("convergence.csv");
  csv << "rung,abs_P,mean_w1,std_error\n";
  json per_seed = json::array();
  for (const auto& e : errors) per_seed.push_back(e);
  std::vector<double> mean(used), se(used);
  for (std::size_t j = 0; j < used; ++j) {
    double m = 0.0, q = 0.0;
    for (const auto& e : errors) m += e[j];
    m /= static_cast<double>(v.seeds);
    for (const auto& e : errors) q += (e[j] - m) * (e[j] - m);
    mean[j] = m;
    se[j] = v.seeds > 1 ? std::sqrt(q / static_cast<double>(v.seeds - 1) / static_cast<double>(v.seeds)) : 0.0;
    const double abs_P = std::ldexp(s.T / static_cast<double>(n0), -static_cast<int>(j));
    ladder.emplace_back(abs_P, m);
    csv << j << ',' << format_double(abs_P) << ',' << format_double(m) << ',' << format_double(se[j]) << '\n';
  }
  if (used < 3) throw ConfigError("convergence.levels: too few rungs for a slope fit");
  SlopeCriterion crit;
  crit.target = v.target_slope;
  crit.tolerance = v.tolerance;
  crit.minimum = v.min_slope;
  const auto report = convergence_slope(ladder, crit, "w1-self-convergence");
  json j = report.to_json();
  j["std_errors"] = se;
  j["per_seed_errors"] = per_seed;
  j["reference"] = v.reference;
  j["w1_method"] = w1_method;
  j["coarse_steps"] = n0;
  j["seeds"] = v.seeds;
  j["N"] = s.N;
  ctx.out.write_json("convergence.json", j);
}

int run_validate(Context& ctx) {
  const auto& s = ctx.config.simulation;
  ValidationOptions opt;
  opt.sample_budget = ctx.config.validation.sample_budget;
  opt.horizon = s.T;
  opt.seed = ctx.config.seed;
  const auto report = validate_hypotheses(ctx.model.coeffs, *ctx.model.levy, opt);
  json j{{"hypotheses", report.to_json()}, {"all_passed", report.all_passed()}};
  try {
    j["tail"] = tail_json(tail_quantities(*ctx.model.levy, ctx.model.coeffs, s.M, s.T));
  } catch (const Error& e) {
    j["tail"] = {{"error", e.what()}};
  }
  if (ctx.config.validation.theta) {
    try {
      const auto theta = theta_lower_bound(*ctx.model.levy, ctx.model.coeffs, default_theta_grid());
      j["theta"] = theta.to_json();
      json windows = json::object();
      const double value = theta.infinite ? kInfiniteTheta : theta.value;
      const double eps = ctx.config.estimator.epsilon.value_or(0.5);
      for (const auto& tag : validity_tags()) {
        try {
          windows[tag] = validity_threshold(tag, ctx.d, value, eps, 1);
        } catch (const Error& e) {
          windows[tag] = e.what();
        }
      }
      j["validity_from_time"] = windows;
      j["validity_assumptions"] = {{"epsilon", eps}, {"l", 1}};
    } catch (const Error& e) {
      j["theta"] = {{"error", e.what()}};
    }
  }
  ctx.out.write_json("validation.json", j);
  return report.all_passed() ? kExitOk : kExitNumeric;
}

void run_tail(Context& ctx) {
  const auto& s = ctx.config.simulation;
  json j = tail_json(tail_quantities(*ctx.model.levy, ctx.model.coeffs, s.M, s.T));
  j["measure"] = ctx.config.model.measure;
  ctx.out.write_json("tail.json", j);
}

const char* status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitUsage: return "config-error";
    case kExitNumeric: return "numeric-failure";
    case kExitIo: return "io-error";
  }
  return "error";
}

}  // namespace

ScenarioOutcome run_scenario(const ScenarioConfig& config) {
  ScenarioOutcome outcome;
  std::size_t d = 0;
  ModelBundle model;
  try {
    d = validate(config);
    model = make_model(config.model);
  } catch (const ConfigError& e) {
    return {kExitUsage, e.what(), {}};
  } catch (const Error& e) {
    return {kExitNumeric, e.what(), {}};
  }

  const std::filesystem::path dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return {kExitIo, "cannot create output directory '" + dir.string() + "': " + ec.message(), {}};

  Outputs out(dir);
  Context ctx{config, std::move(model), d, out};
  const auto start = std::chrono::steady_clock::now();
  try {
    const std::string& s = config.scenario;
    if (s == "simulate") run_simulate(ctx);
    else if (s == "density") run_density(ctx);
    else if (s == "tv-estimate") run_tv(ctx);
    else if (s == "convergence-study") run_convergence(ctx);
    else if (s == "validate-model") {
      outcome.exit_code = run_validate(ctx);
      if (outcome.exit_code != kExitOk) outcome.message = "model hypotheses violated; see validation.json";
    } else if (s == "tail-quantities") run_tail(ctx);
  } catch (const ConfigError& e) {
    outcome = {kExitUsage, e.what(), {}};
  } catch (const IoError& e) {
    outcome = {kExitIo, e.what(), {}};
  } catch (const std::exception& e) {
    outcome = {kExitNumeric, e.what(), {}};
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json files = json::array();
  for (const auto& name : out.files()) {
    std::error_code size_ec;
    const auto bytes = std::filesystem::file_size(dir / name, size_ec);
    files.push_back({{"name", name}, {"bytes", size_ec ? json(nullptr) : json(bytes)}});
  }
  json manifest{{"manifest_version", 1},
                {"tool", "mvjump"},
                {"version", MVJUMP_VERSION},
                {"scenario", config.scenario},
                {"seed", config.seed},
                {"threads", config.threads},
                {"status", status_name(outcome.exit_code)},
                {"exit_code", outcome.exit_code},
                {"message", outcome.message},
                {"wall_seconds", wall},
                {"files", files},
                {"config", config.to_json()}};
  try {
    out.write_json("manifest.json", manifest);
  } catch (const IoError& e) {
    if (outcome.exit_code == kExitOk) outcome = {kExitIo, e.what(), {}};
  }
  outcome.files = out.files();
  return outcome;
}

}  // namespace mvjump
