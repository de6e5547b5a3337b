#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msdc/commands.h"
#include "msdc/simulator.h"

namespace {

void apply_overrides(msdc::RunConfig& cfg, std::optional<std::uint64_t> seed,
                     std::optional<unsigned> threads) {
  if (seed && cfg.scenario) {
    if (auto* g = std::get_if<msdc::WhiteNoiseGhost>(&cfg.scenario->ghost)) g->seed = *seed;
  }
  if (threads && cfg.sweep) cfg.sweep->spec.threads = *threads;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mass-spring-damper-clutch car-following toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "white-noise ghost seed");
    sub->add_option("--threads", threads, "sweep worker threads (0 = all cores)");
  };
  auto* sim = app.add_subcommand("simulate", "integrate the delayed car-following model");
  auto* map = app.add_subcommand("stability-map", "classify a (k~, c~) parameter grid");
  auto* ident = app.add_subcommand("identify", "online SRLS-IQR identification and scoring");
  for (auto* sub : {sim, map, ident}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : msdc::kExitInvalidConfig;
  }

  msdc::RunConfig cfg;
  try {
    cfg = msdc::load_config(config_path);
    apply_overrides(cfg, seed, threads);
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return msdc::kExitInvalidConfig;
  }
  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;

  try {
    if (sim->parsed()) return msdc::cmd_simulate(cfg, dir, std::cout);
    if (map->parsed()) return msdc::cmd_stability_map(cfg, dir, std::cout);
    return msdc::cmd_identify(cfg, dir, std::cout);
  } catch (const msdc::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return msdc::kExitInvalidConfig;
  } catch (const msdc::SimulationDiverged& e) {
    std::cerr << "simulation diverged at t = " << e.time() << " s: " << e.what() << '\n';
    return msdc::kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return msdc::kExitFailure;
  }
}
