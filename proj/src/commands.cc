#include "msdc/commands.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "msdc/filter.h"
#include "msdc/simulator.h"
#include "msdc/trajectory_io.h"

namespace msdc {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return f;
}

void write_json(const fs::path& path, const ojson& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

ojson vehicle_json(const VehicleParams& p) {
  return {{"m", p.m},       {"k", p.k},           {"c", p.c},
          {"alpha", p.alpha}, {"beta", p.beta},   {"tau", p.tau},
          {"v_lower", p.v_lower}, {"v_upper", p.v_upper}};
}

ojson ghost_json(const GhostSignal& g) {
  return std::visit(
      [](const auto& s) -> ojson {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstantGhost>) {
          return {{"type", "constant"}, {"v0", s.v0}};
        } else if constexpr (std::is_same_v<T, SinusoidGhost>) {
          return {{"type", "sinusoid"}, {"v0", s.v0}, {"amplitude", s.amplitude},
                  {"omega", s.omega}};
        } else if constexpr (std::is_same_v<T, WhiteNoiseGhost>) {
          return {{"type", "white_noise"}, {"v0", s.v0}, {"std", s.std}, {"seed", s.seed}};
        } else {
          return {{"type", "recorded"}, {"samples", s.speeds.size()}};
        }
      },
      g);
}

struct SeriesStats {
  double mean = 0.0;
  double std = 0.0;
  double amplitude = 0.0;  // max |v - v*| over the second half
};

SeriesStats series_stats(const std::vector<double>& v, double v_star) {
  SeriesStats s;
  const auto n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(s.std / (n - 1.0)) : 0.0;
  for (std::size_t k = v.size() / 2; k < v.size(); ++k) {
    s.amplitude = std::max(s.amplitude, std::abs(v[k] - v_star));
  }
  return s;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  if (!cfg.scenario) throw ConfigError("simulate needs a scenario section");
  const FleetScenario& fleet = *cfg.scenario;
  const auto traj = simulate(fleet);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_trajectory_csv((dir / "trajectory.csv").string(), traj);

  double v_star = ghost_nominal_speed(fleet.ghost);
  if (!std::isfinite(v_star)) v_star = fleet.initial_speed;
  {
    auto f = open_out(dir / "summary.csv");
    f << "vehicle,mean_speed,std_speed,amplitude\n";
    auto row = [&](std::size_t i, const std::vector<double>& v) {
      const auto s = series_stats(v, v_star);
      fmt::print(f, "{},{},{},{}\n", i, s.mean, s.std, s.amplitude);
    };
    row(0, traj.ghost);
    for (std::size_t i = 0; i < traj.vehicles(); ++i) row(i + 1, traj.speed[i]);
  }

  ojson m;
  m["command"] = "simulate";
  m["vehicles"] = fleet.size();
  m["dt"] = fleet.dt;
  m["duration"] = fleet.duration;
  m["steps"] = traj.steps();
  m["initial_speed"] = fleet.initial_speed;
  m["ghost"] = ghost_json(fleet.ghost);
  auto& vs = m["vehicle_params"];
  vs = ojson::array();
  for (const auto& p : fleet.vehicles) vs.push_back(vehicle_json(p));
  m["files"] = {"trajectory.csv", "summary.csv"};
  write_json(dir / "manifest.json", m);

  fmt::print(log, "simulated {} vehicles for {} s ({} samples) -> {}\n", fleet.size(),
             fleet.duration, traj.steps(), out_dir);
  return kExitOk;
}

int cmd_stability_map(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  if (!cfg.scenario || !cfg.sweep) {
    throw ConfigError("stability-map needs scenario and sweep sections");
  }
  const FleetScenario& tmpl = *cfg.scenario;
  const SweepConfig& sc = *cfg.sweep;

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  ojson m;
  m["command"] = "stability-map";
  m["vehicles"] = tmpl.size();
  m["m"] = tmpl.vehicles.front().m;
  m["alpha"] = tmpl.vehicles.front().alpha;
  m["beta"] = tmpl.vehicles.front().beta;
  m["k_axis"] = {{"lo", sc.spec.k_axis.lo}, {"hi", sc.spec.k_axis.hi},
                 {"step", sc.spec.k_axis.step}, {"open", sc.spec.k_axis.open}};
  m["c_axis"] = {{"lo", sc.spec.c_axis.lo}, {"hi", sc.spec.c_axis.hi},
                 {"step", sc.spec.c_axis.step}, {"open", sc.spec.c_axis.open}};
  m["pade_order"] = sc.spec.pade_order;
  m["omega_grid"] = {{"lo", sc.spec.omega.lo}, {"hi", sc.spec.omega.hi},
                     {"points", sc.spec.omega.points}, {"refine", sc.spec.omega.refine},
                     {"spacing", "log"}};
  m["tol"] = sc.spec.tol;
  m["plant_method"] =
      sc.spec.plant_method == PlantMethod::kEigenvalues ? "eigenvalues" : "argument_principle";
  auto& settings = m["settings"];
  settings = ojson::array();

  bool any_unknown = false;
  for (std::size_t j = 0; j < sc.delay_settings.size(); ++j) {
    SweepSpec spec = sc.spec;
    spec.delays = sc.delay_settings[j];
    const auto map = sweep(tmpl, spec);
    const auto file = fmt::format("stability_map_{}.csv", j);
    {
      auto f = open_out(dir / file);
      write_stability_csv(f, map);
    }
    const auto c = map.counts();
    ojson s;
    s["delays"] = spec.delays;
    s["file"] = file;
    s["cells"] = map.size();
    s["counts"] = {{"PLANT_UNSTABLE", c.plant_unstable},
                   {"PLANT_STABLE_STRING_UNSTABLE", c.string_unstable},
                   {"STRING_STABLE", c.string_stable},
                   {"UNKNOWN", c.unknown},
                   {"BOUNDARY", c.boundary}};
    auto& errors = s["errors"];
    errors = ojson::array();
    for (const auto& cell : map.cells()) {
      if (!cell.error.empty() && errors.size() < 20) {
        errors.push_back({{"k_tilde", cell.k_tilde}, {"c_tilde", cell.c_tilde},
                          {"error", cell.error}});
      }
    }
    settings.push_back(s);
    any_unknown = any_unknown || c.unknown > 0;

    std::string delays;
    for (std::size_t i = 0; i < spec.delays.size(); ++i) {
      delays += fmt::format("{}{}", i ? " " : "", spec.delays[i]);
    }
    fmt::print(log,
               "delays [{}]: PLANT_UNSTABLE={} PLANT_STABLE_STRING_UNSTABLE={} "
               "STRING_STABLE={} UNKNOWN={} BOUNDARY={}\n",
               delays, c.plant_unstable, c.string_unstable, c.string_stable, c.unknown,
               c.boundary);
  }
  write_json(dir / "manifest.json", m);
  if (any_unknown) fmt::print(log, "some cells could not be classified; see manifest.json\n");
  return kExitOk;
}

int cmd_identify(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  if (!cfg.identify) throw ConfigError("identify needs an identify section");
  const IdentifyConfig& ic = *cfg.identify;

  struct Input {
    std::string label;
    TrajectorySet traj;
  };
  std::vector<Input> inputs;
  for (const auto& path : ic.trajectories) {
    inputs.push_back({fs::path(path).filename().string(), read_trajectory_csv(path)});
  }
  for (const auto& path : ic.tables) {
    const auto table = load_table(path, ic.columns);
    ExtractStats stats;
    const auto episodes = extract_episodes(table, ic.extract, &stats);
    fmt::print(log, "{}: {} records ({} malformed, {} non-finite), {} episodes\n", path,
               table.records.size(), table.skipped_malformed, table.dropped_nonfinite,
               episodes.size());
    for (std::size_t j = 0; j < episodes.size(); ++j) {
      inputs.push_back({fmt::format("{}#{}", fs::path(path).filename().string(), j + 1),
                        to_trajectory(episodes[j])});
    }
  }
  if (inputs.empty()) throw std::runtime_error("identify: no valid episodes in the inputs");

  for (const auto& in : inputs) {
    if (std::abs(in.traj.dt() - ic.hp.dt) > 1e-6 * ic.hp.dt) {
      throw std::runtime_error(fmt::format("{}: sampling {} s differs from dt = {} s", in.label,
                                           in.traj.dt(), ic.hp.dt));
    }
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  ojson report;
  report["hyperparameters"] = {{"M", ic.hp.M},         {"alpha", ic.hp.alpha},
                               {"beta", ic.hp.beta},   {"lambda", ic.hp.lambda},
                               {"delta", ic.hp.delta}, {"d", ic.hp.d},
                               {"dt", ic.hp.dt}};
  report["acceleration"] = ic.filter_accel
                               ? ojson{{"source", "filtered"}, {"cutoff_hz", ic.cutoff_hz},
                                       {"order", ic.filter_order}}
                               : ojson{{"source", "finite_difference"}};
  auto& episodes = report["episodes"];
  episodes = ojson::array();
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    TrajectorySet traj = inputs[j].traj;
    AccelSource src = AccelSource::kFiniteDifference;
    if (ic.filter_accel) {
      for (std::size_t i = 0; i < traj.vehicles(); ++i) {
        traj.accel[i] = lowpass_accel(finite_difference_accel(traj.speed[i], ic.hp.dt),
                                      ic.hp.dt, ic.cutoff_hz, ic.filter_order);
      }
      src = AccelSource::kTrajectory;
    }
    const auto rep = predict_and_score(traj, ic.hp, ic.warmup, src);
    const auto file = fmt::format("theta_{}.csv", j + 1);
    {
      auto f = open_out(dir / file);
      write_theta_csv(f, rep);
    }
    ojson e = ojson::parse(report_json(rep, inputs[j].label));
    e["theta_file"] = file;
    episodes.push_back(e);
    fmt::print(log, "{}: {} vehicles, avg RMSE {:.4f}, worst {:.4f} m/s^2\n", inputs[j].label,
               rep.vehicles, rep.average_rmse, rep.worst_rmse);
  }
  write_json(dir / "prediction_report.json", report);
  return kExitOk;
}

}  // namespace msdc
