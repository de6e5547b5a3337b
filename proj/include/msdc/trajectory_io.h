#pragma once

#include <iosfwd>
#include <string>

#include "msdc/simulator.h"

namespace msdc {

// Comma-separated table: time, v0, then h_i, v_i, a_i for each vehicle.
// Values are written in shortest round-trip form.
void write_trajectory_csv(std::ostream& os, const TrajectorySet& traj);
void write_trajectory_csv(const std::string& path, const TrajectorySet& traj);

TrajectorySet read_trajectory_csv(std::istream& is);
TrajectorySet read_trajectory_csv(const std::string& path);

}  // namespace msdc
