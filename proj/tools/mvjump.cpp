#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "mvjump/errors.hpp"
#include "mvjump/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mvjump: truncated-Euler particle systems for jump McKean-Vlasov equations"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out, scenario;
  app.add_option("--config", config_path, "Scenario config (JSON) or a previous manifest.json")->required();
  app.add_option("--seed", seed, "Master seed, overrides the config");
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", out, "Output directory, overrides the config");
  app.add_option("--scenario", scenario, "Scenario name, overrides the config");
  app.set_version_flag("--version", MVJUMP_VERSION);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mvjump::kExitUsage;
  }

  mvjump::ScenarioConfig config;
  try {
    config = mvjump::parse_config_file(config_path);
  } catch (const mvjump::ConfigError& e) {
    std::cerr << "mvjump: " << e.what() << '\n';
    return mvjump::kExitUsage;
  }
  if (seed) config.seed = *seed;
  if (threads) config.threads = *threads;
  if (out) config.output_dir = *out;
  if (scenario) config.scenario = *scenario;

  const auto outcome = mvjump::run_scenario(config);
  if (outcome.exit_code != mvjump::kExitOk) {
    std::cerr << "mvjump: " << outcome.message << '\n';
  }
  for (const auto& f : outcome.files) std::cout << config.output_dir << '/' << f << '\n';
  return outcome.exit_code;
}
