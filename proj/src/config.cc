#include "msdc/config.h"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace msdc {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void allow_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

double number(const json& obj, const char* key, double fallback,
              const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(fmt::format("{}.{} must be a number", where, key));
  return v.get<double>();
}

template <typename Int>
Int integer(const json& obj, const char* key, Int fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (std::is_unsigned_v<Int> && v.get<long long>() < 0)) {
    throw ConfigError(fmt::format("{}.{} must be a non-negative integer", where, key));
  }
  return v.get<Int>();
}

bool boolean(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(fmt::format("{}.{} must be a boolean", where, key));
  return v.get<bool>();
}

std::string text(const json& obj, const char* key, const std::string& fallback,
                 const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(fmt::format("{}.{} must be a string", where, key));
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(fmt::format("{} must be an array", where));
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(fmt::format("{} must hold numbers", where));
    out.push_back(x.get<double>());
  }
  return out;
}

std::string resolve(const std::string& base, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base) / p).string();
}

VehicleParams vehicle(const json& obj, VehicleParams p, const std::string& where) {
  allow_keys(obj, where,
             {"count", "m", "k", "c", "alpha", "beta", "tau", "v_lower", "v_upper"});
  p.m = number(obj, "m", p.m, where);
  p.k = number(obj, "k", p.k, where);
  p.c = number(obj, "c", p.c, where);
  p.alpha = number(obj, "alpha", p.alpha, where);
  p.beta = number(obj, "beta", p.beta, where);
  p.tau = number(obj, "tau", p.tau, where);
  p.v_lower = number(obj, "v_lower", p.v_lower, where);
  p.v_upper = number(obj, "v_upper", p.v_upper, where);
  return p;
}

GhostSignal ghost(const json& obj, double v0_default, const std::string& base) {
  const std::string where = "scenario.ghost";
  allow_keys(obj, where, {"type", "v0", "amplitude", "omega", "std", "seed", "speeds", "file"});
  const std::string type = text(obj, "type", "constant", where);
  const double v0 = number(obj, "v0", v0_default, where);
  if (type == "constant") return ConstantGhost{v0};
  if (type == "sinusoid") {
    SinusoidGhost g{v0, number(obj, "amplitude", 1.0, where), number(obj, "omega", 1.0, where)};
    if (!(g.amplitude >= 0.0)) throw ConfigError("scenario.ghost.amplitude must be >= 0");
    return g;
  }
  if (type == "white_noise") {
    WhiteNoiseGhost g{v0, number(obj, "std", 0.5, where),
                      integer<std::uint64_t>(obj, "seed", 1, where)};
    if (!(g.std >= 0.0)) throw ConfigError("scenario.ghost.std must be >= 0");
    return g;
  }
  if (type == "recorded") {
    RecordedGhost g;
    if (obj.contains("speeds")) {
      g.speeds = numbers(obj.at("speeds"), where + ".speeds");
    } else if (obj.contains("file")) {
      const auto path = resolve(base, text(obj, "file", "", where));
      std::ifstream f(path);
      if (!f) throw ConfigError(fmt::format("cannot open ghost trace '{}'", path));
      double v;
      while (f >> v) g.speeds.push_back(v);
    } else {
      throw ConfigError("recorded ghost needs 'speeds' or 'file'");
    }
    return g;
  }
  throw ConfigError(fmt::format("unknown ghost type '{}'", type));
}

FleetScenario scenario(const json& obj, const std::string& base) {
  const std::string where = "scenario";
  allow_keys(obj, where,
             {"vehicles", "defaults", "ghost", "dt", "duration", "initial_speed",
              "initial_perturbation"});
  FleetScenario f;
  f.dt = number(obj, "dt", f.dt, where);
  f.duration = number(obj, "duration", f.duration, where);
  f.initial_speed = number(obj, "initial_speed", f.initial_speed, where);

  VehicleParams defaults;
  if (obj.contains("defaults")) defaults = vehicle(obj.at("defaults"), defaults, "scenario.defaults");
  if (!obj.contains("vehicles")) throw ConfigError("scenario.vehicles is required");
  const auto& v = obj.at("vehicles");
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      f.vehicles.push_back(vehicle(v[i], defaults, fmt::format("scenario.vehicles[{}]", i)));
    }
  } else {
    const auto count = integer<std::size_t>(v, "count", 0, "scenario.vehicles");
    if (count == 0) throw ConfigError("scenario.vehicles.count must be >= 1");
    f.vehicles.assign(count, vehicle(v, defaults, "scenario.vehicles"));
  }
  f.ghost = obj.contains("ghost") ? ghost(obj.at("ghost"), f.initial_speed, base)
                                  : GhostSignal{ConstantGhost{f.initial_speed}};
  if (obj.contains("initial_perturbation")) {
    f.initial_perturbation = numbers(obj.at("initial_perturbation"),
                                     "scenario.initial_perturbation");
  }
  return f;
}

GridAxis axis(const json& obj, const std::string& where) {
  allow_keys(obj, where, {"lo", "hi", "step", "open"});
  GridAxis a;
  a.lo = number(obj, "lo", a.lo, where);
  a.hi = number(obj, "hi", a.hi, where);
  a.step = number(obj, "step", a.step, where);
  a.open = boolean(obj, "open", a.open, where);
  return a;
}

SweepConfig sweep(const json& obj) {
  const std::string where = "sweep";
  allow_keys(obj, where,
             {"k", "c", "delay_settings", "pade_order", "omega", "tol", "plant_method",
              "threads"});
  SweepConfig s;
  if (obj.contains("k")) s.spec.k_axis = axis(obj.at("k"), "sweep.k");
  if (obj.contains("c")) s.spec.c_axis = axis(obj.at("c"), "sweep.c");
  if (obj.contains("delay_settings")) {
    const auto& d = obj.at("delay_settings");
    if (!d.is_array() || d.empty()) throw ConfigError("sweep.delay_settings must be a non-empty array");
    s.delay_settings.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto where_i = fmt::format("sweep.delay_settings[{}]", i);
      s.delay_settings.push_back(d[i].is_number() ? std::vector<double>{d[i].get<double>()}
                                                  : numbers(d[i], where_i));
    }
  }
  s.spec.pade_order = integer<int>(obj, "pade_order", s.spec.pade_order, where);
  s.spec.tol = number(obj, "tol", s.spec.tol, where);
  s.spec.threads = integer<unsigned>(obj, "threads", 0, where);
  const std::string method = text(obj, "plant_method", "argument_principle", where);
  if (method == "argument_principle") {
    s.spec.plant_method = PlantMethod::kArgumentPrinciple;
  } else if (method == "eigenvalues") {
    s.spec.plant_method = PlantMethod::kEigenvalues;
  } else {
    throw ConfigError(fmt::format("unknown sweep.plant_method '{}'", method));
  }
  if (obj.contains("omega")) {
    const auto& w = obj.at("omega");
    allow_keys(w, "sweep.omega", {"lo", "hi", "points", "refine"});
    s.spec.omega.lo = number(w, "lo", s.spec.omega.lo, "sweep.omega");
    s.spec.omega.hi = number(w, "hi", s.spec.omega.hi, "sweep.omega");
    s.spec.omega.points = integer<std::size_t>(w, "points", s.spec.omega.points, "sweep.omega");
    s.spec.omega.refine = boolean(w, "refine", s.spec.omega.refine, "sweep.omega");
  }
  return s;
}

ColumnMap columns(const json& obj) {
  const std::string where = "identify.column_map";
  allow_keys(obj, where,
             {"preset", "time", "vehicle_id", "position", "speed", "lane_id", "preceding_id",
              "length", "space_headway", "time_factor", "position_factor", "speed_factor",
              "length_factor"});
  const std::string preset = text(obj, "preset", "", where);
  ColumnMap m;
  if (preset == "ngsim") {
    m = ColumnMap::ngsim();
  } else if (!preset.empty()) {
    throw ConfigError(fmt::format("unknown column_map preset '{}'", preset));
  }
  m.time = text(obj, "time", m.time, where);
  m.vehicle_id = text(obj, "vehicle_id", m.vehicle_id, where);
  m.position = text(obj, "position", m.position, where);
  m.speed = text(obj, "speed", m.speed, where);
  m.lane_id = text(obj, "lane_id", m.lane_id, where);
  m.preceding_id = text(obj, "preceding_id", m.preceding_id, where);
  m.length = text(obj, "length", m.length, where);
  m.space_headway = text(obj, "space_headway", m.space_headway, where);
  m.time_factor = number(obj, "time_factor", m.time_factor, where);
  m.position_factor = number(obj, "position_factor", m.position_factor, where);
  m.speed_factor = number(obj, "speed_factor", m.speed_factor, where);
  m.length_factor = number(obj, "length_factor", m.length_factor, where);
  for (double f : {m.time_factor, m.position_factor, m.speed_factor, m.length_factor}) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("column_map factors must be > 0");
  }
  return m;
}

IdentifyConfig identify(const json& obj, const std::string& base) {
  const std::string where = "identify";
  allow_keys(obj, where,
             {"hyperparameters", "warmup", "trajectories", "tables", "column_map", "extract",
              "filter"});
  IdentifyConfig c;
  if (obj.contains("hyperparameters")) {
    const auto& h = obj.at("hyperparameters");
    const std::string hw = "identify.hyperparameters";
    allow_keys(h, hw, {"M", "alpha", "beta", "lambda", "delta", "d", "dt", "v_lower", "v_upper"});
    c.hp.M = number(h, "M", c.hp.M, hw);
    c.hp.alpha = number(h, "alpha", c.hp.alpha, hw);
    c.hp.beta = number(h, "beta", c.hp.beta, hw);
    c.hp.lambda = number(h, "lambda", c.hp.lambda, hw);
    c.hp.delta = number(h, "delta", c.hp.delta, hw);
    c.hp.d = integer<std::size_t>(h, "d", c.hp.d, hw);
    c.hp.dt = number(h, "dt", c.hp.dt, hw);
    c.hp.v_lower = number(h, "v_lower", c.hp.v_lower, hw);
    c.hp.v_upper = number(h, "v_upper", c.hp.v_upper, hw);
  }
  c.warmup = integer<std::size_t>(obj, "warmup", c.warmup, where);
  auto paths = [&](const char* key) {
    std::vector<std::string> out;
    if (!obj.contains(key)) return out;
    const auto& a = obj.at(key);
    if (!a.is_array()) throw ConfigError(fmt::format("identify.{} must be an array", key));
    for (const auto& p : a) {
      if (!p.is_string()) throw ConfigError(fmt::format("identify.{} must hold paths", key));
      const auto full = resolve(base, p.get<std::string>());
      if (!fs::exists(full)) throw ConfigError(fmt::format("input file '{}' not found", full));
      out.push_back(full);
    }
    return out;
  };
  c.trajectories = paths("trajectories");
  c.tables = paths("tables");
  if (obj.contains("column_map")) c.columns = columns(obj.at("column_map"));
  if (obj.contains("extract")) {
    const auto& e = obj.at("extract");
    const std::string ew = "identify.extract";
    allow_keys(e, ew,
               {"lane_id", "segment_lo", "segment_hi", "min_duration", "min_chain", "dt",
                "use_dataset_headway"});
    c.extract.lane_id = integer<std::int64_t>(e, "lane_id", c.extract.lane_id, ew);
    c.extract.segment_lo = number(e, "segment_lo", c.extract.segment_lo, ew);
    c.extract.segment_hi = number(e, "segment_hi", c.extract.segment_hi, ew);
    c.extract.min_duration = number(e, "min_duration", c.extract.min_duration, ew);
    c.extract.min_chain = integer<std::size_t>(e, "min_chain", c.extract.min_chain, ew);
    c.extract.dt = number(e, "dt", c.hp.dt, ew);
    c.extract.use_dataset_headway =
        boolean(e, "use_dataset_headway", c.extract.use_dataset_headway, ew);
    if (!(c.extract.segment_lo < c.extract.segment_hi)) {
      throw ConfigError("identify.extract segment bounds must be increasing");
    }
    if (!(c.extract.dt > 0.0) || !(c.extract.min_duration >= 0.0)) {
      throw ConfigError("identify.extract needs dt > 0 and min_duration >= 0");
    }
  } else {
    c.extract.dt = c.hp.dt;
  }
  if (obj.contains("filter")) {
    const auto& f = obj.at("filter");
    allow_keys(f, "identify.filter", {"enabled", "cutoff_hz", "order"});
    c.filter_accel = boolean(f, "enabled", true, "identify.filter");
    c.cutoff_hz = number(f, "cutoff_hz", c.cutoff_hz, "identify.filter");
    c.filter_order = integer<int>(f, "order", c.filter_order, "identify.filter");
    if (c.filter_accel &&
        (c.filter_order < 1 || !(c.cutoff_hz > 0.0) || !(c.cutoff_hz < 0.5 / c.hp.dt))) {
      throw ConfigError("identify.filter needs order >= 1 and 0 < cutoff < Nyquist");
    }
  }
  try {
    c.hp.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

RunConfig parse_config(const std::string& text_in, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  allow_keys(doc, "config", {"scenario", "sweep", "identify", "output"});
  RunConfig cfg;
  try {
    if (doc.contains("scenario")) cfg.scenario = scenario(doc.at("scenario"), base_dir);
    if (doc.contains("sweep")) cfg.sweep = sweep(doc.at("sweep"));
    if (doc.contains("identify")) cfg.identify = identify(doc.at("identify"), base_dir);
    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      allow_keys(o, "output", {"directory"});
      cfg.output_dir = text(o, "directory", cfg.output_dir, "output");
    }
    if (cfg.scenario) cfg.scenario->validate();
    if (cfg.sweep) {
      if (!cfg.scenario) throw ConfigError("sweep needs a scenario fleet template");
      for (const auto& d : cfg.sweep->delay_settings) {
        SweepSpec s = cfg.sweep->spec;
        s.delays = d;
        s.validate(cfg.scenario->size());
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config type error: {}", e.what()));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::stringstream ss;
  ss << f.rdbuf();
  const auto parent = fs::path(path).parent_path();
  return parse_config(ss.str(), parent.empty() ? "." : parent.string());
}

}  // namespace msdc
