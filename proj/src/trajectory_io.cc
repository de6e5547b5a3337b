#include "msdc/trajectory_io.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace msdc {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw InvalidArgument("bad number: " + s);
  return v;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const TrajectorySet& traj) {
  std::string header = "time,v0";
  for (std::size_t i = 1; i <= traj.vehicles(); ++i) {
    header += fmt::format(",h_{0},v_{0},a_{0}", i);
  }
  os << header << '\n';
  fmt::memory_buffer row;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    row.clear();
    fmt::format_to(std::back_inserter(row), "{},{}", traj.time[k], traj.ghost[k]);
    for (std::size_t i = 0; i < traj.vehicles(); ++i) {
      fmt::format_to(std::back_inserter(row), ",{},{},{}", traj.headway[i][k],
                     traj.speed[i][k], traj.accel[i][k]);
    }
    row.push_back('\n');
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

void write_trajectory_csv(const std::string& path, const TrajectorySet& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_trajectory_csv(os, traj);
}

TrajectorySet read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("trajectory file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "time" || header[1] != "v0" ||
      (header.size() - 2) % 3 != 0) {
    throw InvalidArgument("trajectory header must be time,v0,(h_i,v_i,a_i)*");
  }
  const std::size_t n = (header.size() - 2) / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = std::to_string(i + 1);
    if (header[2 + 3 * i] != "h_" + idx || header[3 + 3 * i] != "v_" + idx ||
        header[4 + 3 * i] != "a_" + idx) {
      throw InvalidArgument("unexpected trajectory column near vehicle " + idx);
    }
  }
  TrajectorySet traj;
  traj.headway.resize(n);
  traj.speed.resize(n);
  traj.accel.resize(n);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw InvalidArgument(
          fmt::format("trajectory line {} has {} cells, expected {}", line_no,
                      cells.size(), header.size()));
    }
    traj.time.push_back(parse_double(cells[0]));
    traj.ghost.push_back(parse_double(cells[1]));
    for (std::size_t i = 0; i < n; ++i) {
      traj.headway[i].push_back(parse_double(cells[2 + 3 * i]));
      traj.speed[i].push_back(parse_double(cells[3 + 3 * i]));
      traj.accel[i].push_back(parse_double(cells[4 + 3 * i]));
    }
  }
  return traj;
}

TrajectorySet read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open trajectory file " + path);
  return read_trajectory_csv(is);
}

}  // namespace msdc
