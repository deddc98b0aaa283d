#pragma once

// Scenario configs (versioned JSON) and the pipelines behind the CLI.
//
// Scenarios: simulate, density, tv-estimate, convergence-study,
// validate-model, tail-quantities.  Every run writes manifest.json next to
// its outputs; the manifest echoes the fully defaulted config, so feeding it
// back as --config reproduces the outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvjump/models.hpp"
#include "mvjump/types.hpp"

namespace mvjump {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitNumeric = 3, kExitIo = 4 };

const std::vector<std::string>& scenario_names();

struct InitialSpec {
  std::string kind = "point";  ///< point, gaussian, samples
  Vec mean;                    ///< point / gaussian; zeros of the model dimension when empty
  std::vector<double> cov;     ///< gaussian, d x d row-major
  std::string path;            ///< samples: snapshot CSV
};

struct SimulationSpec {
  double T = 1.0;
  double step = 0.1;  ///< largest step |P|
  std::size_t M = 1;
  std::size_t N = 100;
  InitialSpec initial;
  std::vector<double> record_times;  ///< grid points; {T} when empty
  std::string snapshot_format = "csv";  ///< csv, binary, both
  bool sample_jump_times = false;
};

struct TestFunctionSpec {
  std::string kind = "box";  ///< box, constant, cos
  Vec lower, upper;          ///< box; +-infinity written as null
  double value = 1.0;        ///< constant
};

struct EstimatorSpec {
  std::string rule;  ///< defaults to density-plain (density) or tv-plain (tv-estimate)
  std::optional<double> epsilon;
  /// 0 means the rule's minimal N.
  std::size_t particles = 0;
  std::size_t max_particles = 2000000;
  std::size_t repetitions = 1;
  Vec grid_lower, grid_upper;
  std::vector<std::size_t> grid_points;
  std::vector<TestFunctionSpec> functions;
  std::size_t gauss_budget = 4096;
};

struct ConvergenceSpec {
  double coarse_step = 0.08;
  std::size_t levels = 4;
  std::size_t seeds = 20;
  std::string reference = "successive";  ///< successive or finest
  std::optional<double> target_slope = 1.0;
  double tolerance = 0.3;
  std::optional<double> min_slope = 0.7;
  std::size_t directions = 64;
};

struct ValidationSpec {
  std::size_t sample_budget = 1000;
  bool theta = true;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string scenario;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "mvjump-out";
  ModelChoice model;
  SimulationSpec simulation;
  EstimatorSpec estimator;
  ConvergenceSpec convergence;
  ValidationSpec validation;

  nlohmann::json to_json() const;
};

/// Strict: unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the field.  A manifest is accepted in place of a config.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig parse_config_file(const std::filesystem::path& path);
ScenarioConfig config_from_json(const nlohmann::json& j);

struct ScenarioOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::string> files;  ///< relative to the output directory
};

/// Runs the pipeline and writes outputs plus manifest.json.  Numeric and
/// I/O failures are reported through the exit code (the manifest is still
/// written when possible); configuration errors found before any output is
/// produced leave the directory untouched.
ScenarioOutcome run_scenario(const ScenarioConfig& config);

}  // namespace mvjump
