#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msdc/dataio.h"
#include "msdc/identifier.h"
#include "msdc/model.h"
#include "msdc/stability.h"

namespace msdc {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct SweepConfig {
  SweepSpec spec;  // spec.delays is overwritten per setting
  std::vector<std::vector<double>> delay_settings{{0.0}};
};

struct IdentifyConfig {
  IdentHyperParams hp;
  std::size_t warmup = 100;
  std::vector<std::string> trajectories;  // simulator-format CSV files
  std::vector<std::string> tables;        // raw trajectory tables
  ColumnMap columns;
  ExtractOptions extract;
  bool filter_accel = false;
  double cutoff_hz = 3.0;
  int filter_order = 2;
};

struct RunConfig {
  std::optional<FleetScenario> scenario;
  std::optional<SweepConfig> sweep;
  std::optional<IdentifyConfig> identify;
  std::string output_dir = "out";
};

// Parses and validates a JSON document; relative input paths resolve
// against `base_dir`. Throws ConfigError on any unknown key or invalid value.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

}  // namespace msdc
