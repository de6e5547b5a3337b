#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msdc/simulator.h"

namespace msdc {

// Binds external column names to the record fields. Optional fields are
// ignored when their name is empty. Factors convert file units to SI
// (e.g. 0.3048 for feet, 0.001 for millisecond timestamps).
struct ColumnMap {
  std::string time = "time";
  std::string vehicle_id = "vehicle_id";
  std::string position = "position";
  std::string speed = "speed";
  std::string lane_id = "lane_id";
  std::string preceding_id;
  std::string length;
  std::string space_headway;

  double time_factor = 1.0;
  double position_factor = 1.0;
  double speed_factor = 1.0;
  double length_factor = 1.0;

  // NGSIM column names in feet and millisecond epoch time.
  static ColumnMap ngsim();
};

struct TrajectoryRecord {
  double time = 0.0;
  std::int64_t vehicle_id = 0;
  double position = 0.0;
  double speed = 0.0;
  std::int64_t lane_id = 0;
  std::optional<std::int64_t> preceding_id;
  std::optional<double> length;
  std::optional<double> space_headway;
};

struct RawTrajectoryTable {
  std::vector<TrajectoryRecord> records;  // sorted by (vehicle, time)
  std::size_t dropped_nonfinite = 0;
  std::size_t skipped_malformed = 0;
  std::size_t dropped_duplicate = 0;  // repeated (vehicle, time) pairs
};

// Delimiter is detected from the header: comma, then tab, then whitespace.
RawTrajectoryTable load_table(std::istream& is, const ColumnMap& map);
RawTrajectoryTable load_table(const std::string& path, const ColumnMap& map);

struct Episode {
  std::vector<std::int64_t> ids;  // lead first
  double dt = 0.0;
  std::vector<double> time;
  std::vector<std::vector<double>> position;  // [vehicle][sample]
  std::vector<std::vector<double>> speed;     // [vehicle][sample]
  // headway[i][k] = h_{i,i+1}: gap in front of chain member i+1.
  std::vector<std::vector<double>> headway;
  double segment_lo = 0.0;
  double segment_hi = 0.0;
  std::int64_t lane_id = 0;

  std::size_t vehicles() const { return ids.size(); }
  std::size_t samples() const { return time.size(); }
  double duration() const { return time.empty() ? 0.0 : time.back() - time.front(); }
};

struct ExtractOptions {
  std::int64_t lane_id = 1;
  double segment_lo = 121.92;  // [m]
  double segment_hi = 487.68;  // [m]
  double min_duration = 30.0;  // [s]
  std::size_t min_chain = 3;
  double dt = 0.1;             // output sampling [s]
  bool use_dataset_headway = false;
};

struct ExtractStats {
  std::size_t windows = 0;            // candidate windows with enough members
  std::size_t too_short = 0;
  std::size_t nonpositive_headway = 0;
};

// Maximal windows during which the same vehicles, in the same order, occupy
// the lane inside the segment. Each window is resampled to opts.dt.
std::vector<Episode> extract_episodes(const RawTrajectoryTable& table,
                                      const ExtractOptions& opts,
                                      ExtractStats* stats = nullptr);

// Linear interpolation onto t0 + j*dt. Input gaps longer than 2*dt split
// the episode.
std::vector<Episode> resample(const Episode& episode, double dt);

// Independent re-check of the emitted-episode invariants; returns a
// description of the first violation.
std::optional<std::string> check_episode(const Episode& episode);

// Lead vehicle becomes the ghost; the followers form the chain.
// Accelerations are first differences of speed.
TrajectorySet to_trajectory(const Episode& episode);

}  // namespace msdc
