#pragma once

#include <iosfwd>
#include <string>

#include "msdc/config.h"

namespace msdc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidConfig = 1;
inline constexpr int kExitFailure = 2;

// Each command writes into `out_dir` (created if needed) and reports to
// `log`. Library exceptions propagate; the tool maps them to exit codes.
//
// simulate:      trajectory.csv, summary.csv, manifest.json
// stability-map: stability_map_<j>.csv per delay setting, manifest.json
// identify:      theta_<j>.csv per episode (1-based), prediction_report.json
int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_stability_map(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_identify(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

}  // namespace msdc
