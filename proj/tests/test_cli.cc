#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "msdc/commands.h"
#include "msdc/config.h"
#include "msdc/trajectory_io.h"

using namespace msdc;
namespace fs = std::filesystem;

#ifndef MSDC_BINARY
#error "MSDC_BINARY must point at the built msdc tool"
#endif

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            fmt::format("msdc_cli_{}_{}", ::testing::UnitTest::GetInstance()->random_seed(),
                        counter()++);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path path_;
};

int run_tool(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" {} > /dev/null 2>&1", MSDC_BINARY, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

const char* kNoiseScenario = R"({
  "scenario": {
    "vehicles": {"count": 5, "k": 1.0, "c": 1.2, "alpha": 0.2, "beta": 1.0, "tau": 0.2},
    "ghost": {"type": "white_noise", "std": 0.5, "seed": 3},
    "dt": 0.1, "duration": 30.0, "initial_speed": 20.0
  }
})";

}  // namespace

TEST(Config, VehicleDefaults) {
  const auto cfg = parse_config(R"({"scenario": {"vehicles": {"count": 4}}})");
  ASSERT_TRUE(cfg.scenario.has_value());
  ASSERT_EQ(cfg.scenario->size(), 4u);
  const auto& p = cfg.scenario->vehicles[0];
  EXPECT_EQ(p.m, 1.0);
  EXPECT_EQ(p.alpha, 0.2);
  EXPECT_EQ(p.beta, 1.0);
  EXPECT_EQ(p.tau, 0.0);
  EXPECT_FALSE(cfg.sweep.has_value());
}

TEST(Config, IdentifyHyperparameterDefaults) {
  TempDir dir;
  dir.write("t.csv", "time,v0,h_1,v_1,a_1\n0,20,20,20,0\n");
  const auto cfg = parse_config(R"({"identify": {"trajectories": ["t.csv"]}})",
                                dir.path().string());
  ASSERT_TRUE(cfg.identify.has_value());
  const auto& hp = cfg.identify->hp;
  EXPECT_EQ(hp.M, 1.0);
  EXPECT_EQ(hp.alpha, 0.1);
  EXPECT_EQ(hp.beta, 2.5);
  EXPECT_EQ(hp.lambda, 0.95);
  EXPECT_EQ(hp.delta, 100.0);
  EXPECT_EQ(hp.d, 5u);
  EXPECT_EQ(hp.dt, 0.1);
  EXPECT_EQ(cfg.identify->warmup, 100u);
  EXPECT_EQ(cfg.identify->trajectories[0], (dir.path() / "t.csv").string());
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_config(R"({"scenery": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"vehicles": {"count": 2, "mass": 1}}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"sweep": {"k": {"lo": 0, "width": 1}}})"), ConfigError);
}

TEST(Config, InvalidValuesAreRejected) {
  EXPECT_THROW(parse_config(R"({"scenario": {"vehicles": {"count": 0}}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"vehicles": {"count": 2, "m": -1}}})"),
               InvalidArgument);
  EXPECT_THROW(parse_config(R"({"scenario": {"vehicles": {"count": 2}, "dt": "x"}})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"identify": {"trajectories": ["/no/such/file.csv"]}})"),
               ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sweep": {"plant_method": "magic"}})"), ConfigError);
}

TEST(Config, SweepDelaySettings) {
  const auto cfg = parse_config(R"({
    "scenario": {"vehicles": {"count": 3}},
    "sweep": {"delay_settings": [0.1, [0.0, 0.2, 0.3]], "pade_order": 2}
  })");
  ASSERT_TRUE(cfg.sweep.has_value());
  ASSERT_EQ(cfg.sweep->delay_settings.size(), 2u);
  EXPECT_EQ(cfg.sweep->delay_settings[0], std::vector<double>{0.1});
  EXPECT_EQ(cfg.sweep->delay_settings[1], (std::vector<double>{0.0, 0.2, 0.3}));
  EXPECT_EQ(cfg.sweep->spec.pade_order, 2);
}

TEST(Config, HeterogeneousVehicleArray) {
  const auto cfg = parse_config(R"({"scenario": {
    "defaults": {"alpha": 0.0},
    "vehicles": [{"k": 2.0}, {"c": 3.0, "tau": 0.1}]
  }})");
  ASSERT_EQ(cfg.scenario->size(), 2u);
  EXPECT_EQ(cfg.scenario->vehicles[0].k, 2.0);
  EXPECT_EQ(cfg.scenario->vehicles[0].alpha, 0.0);
  EXPECT_EQ(cfg.scenario->vehicles[1].c, 3.0);
  EXPECT_EQ(cfg.scenario->vehicles[1].tau, 0.1);
}

TEST(Tool, InvalidConfigExitsWithCodeOneAndWritesNothing) {
  TempDir dir;
  const auto cfg = dir.write("bad.json", R"({"scenario": {"vehicles": {"count": 2, "bogus": 1}}})");
  const auto out = dir.path() / "out";
  EXPECT_EQ(run_tool(fmt::format("simulate --config {} --out {}", cfg.string(), out.string())),
            kExitInvalidConfig);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_tool(fmt::format("simulate --config {} --out {}",
                                 (dir.path() / "missing.json").string(), out.string())),
            kExitInvalidConfig);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Tool, MissingSectionIsAConfigError) {
  TempDir dir;
  const auto cfg = dir.write("c.json", kNoiseScenario);
  EXPECT_EQ(run_tool(fmt::format("identify --config {} --out {}", cfg.string(),
                                 (dir.path() / "o").string())),
            kExitInvalidConfig);
}

TEST(Tool, SimulateIsDeterministicForFixedSeed) {
  TempDir dir;
  const auto cfg = dir.write("c.json", kNoiseScenario);
  const auto a = dir.path() / "a", b = dir.path() / "b", c = dir.path() / "c";
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {} --seed 11", cfg.string(), a.string())),
            kExitOk);
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {} --seed 11", cfg.string(), b.string())),
            kExitOk);
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {} --seed 12", cfg.string(), c.string())),
            kExitOk);
  for (const char* f : {"trajectory.csv", "summary.csv", "manifest.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "trajectory.csv"), slurp(c / "trajectory.csv"));
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["vehicles"], 5);
  EXPECT_EQ(manifest["vehicle_params"].size(), 5u);
}

TEST(Tool, EquilibriumScenarioStaysFlat) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"scenario": {
    "vehicles": {"count": 4, "k": 1.0, "c": 1.0, "tau": 0.3},
    "ghost": {"type": "constant"}, "duration": 20.0, "initial_speed": 20.0}})");
  const auto out = dir.path() / "o";
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {}", cfg.string(), out.string())),
            kExitOk);
  const auto t = read_trajectory_csv((out / "trajectory.csv").string());
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < t.steps(); ++k) {
      EXPECT_EQ(t.speed[i][k], 20.0);
      EXPECT_EQ(t.headway[i][k], 20.0);
    }
  }
}

TEST(Tool, StringStableChainDoesNotAmplifySinusoid) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({"scenario": {
    "vehicles": {"count": 10, "k": 1.0, "c": 2.0, "alpha": 0.2},
    "ghost": {"type": "sinusoid", "amplitude": 1.0, "omega": 0.5},
    "dt": 0.05, "duration": 120.0, "initial_speed": 20.0}})");
  const auto out = dir.path() / "o";
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {}", cfg.string(), out.string())),
            kExitOk);
  std::ifstream f(out / "summary.csv");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "vehicle,mean_speed,std_speed,amplitude");
  double ghost_amp = 0.0;
  int rows = 0;
  while (std::getline(f, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 4u);
    if (rows == 0) {
      ghost_amp = v[3];
    } else {
      EXPECT_LE(v[3], ghost_amp * (1.0 + 1e-3)) << "vehicle " << v[0];
    }
    ++rows;
  }
  EXPECT_EQ(rows, 11);
}

TEST(Tool, StabilityMapOutputs) {
  TempDir dir;
  const auto cfg = dir.write("c.json", R"({
    "scenario": {"vehicles": {"count": 1}},
    "sweep": {"k": {"lo": -2, "hi": 2, "step": 0.5}, "c": {"lo": -2, "hi": 2, "step": 0.5},
              "delay_settings": [0.0, 0.2]}})");
  const auto out = dir.path() / "o";
  ASSERT_EQ(run_tool(fmt::format("stability-map --config {} --out {} --threads 2", cfg.string(),
                                 out.string())),
            kExitOk);
  for (const char* f : {"stability_map_0.csv", "stability_map_1.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto csv = slurp(out / "stability_map_0.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k_tilde,c_tilde,class,worst_vehicle,sup_gain");
  // 7 interior values per axis.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 49);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["settings"].size(), 2u);
}

TEST(Tool, IdentifyOnSimulatedTrajectory) {
  TempDir dir;
  const auto scen = dir.write("s.json", R"({"scenario": {
    "vehicles": {"count": 3, "k": 1.0, "c": 1.5, "alpha": 0.1, "beta": 2.5, "tau": 0.4},
    "ghost": {"type": "white_noise", "std": 0.5, "seed": 5},
    "duration": 60.0, "initial_speed": 20.0}})");
  const auto sim_out = dir.path() / "sim";
  ASSERT_EQ(run_tool(fmt::format("simulate --config {} --out {}", scen.string(), sim_out.string())),
            kExitOk);
  const auto icfg = dir.write("i.json", fmt::format(R"({{"identify": {{
    "trajectories": ["{}"], "hyperparameters": {{"d": 5}}}}}})",
                                                    (sim_out / "trajectory.csv").string()));
  const auto out = dir.path() / "id";
  ASSERT_EQ(run_tool(fmt::format("identify --config {} --out {}", icfg.string(), out.string())),
            kExitOk);
  ASSERT_TRUE(fs::exists(out / "theta_1.csv"));
  const auto report = nlohmann::json::parse(slurp(out / "prediction_report.json"));
  ASSERT_TRUE(report.is_object());
  const auto& ep = report["episodes"][0];
  EXPECT_LT(ep["average_rmse"].get<double>(), 1e-3);
}

TEST(Config, BundledScenarioConfigsParse) {
  for (const char* name : {"stability_map.json", "stop_and_go.json", "string_stable.json",
                           "ident_chain.json"}) {
    EXPECT_NO_THROW(load_config((fs::path(MSDC_CONFIG_DIR) / name).string())) << name;
  }
}
