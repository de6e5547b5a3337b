#include "msdc/dataio.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <utility>

#include <fmt/core.h>

namespace msdc {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n\"'";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

enum class Delim { kComma, kTab, kSpace };

std::vector<std::string> split(const std::string& line, Delim d) {
  std::vector<std::string> out;
  if (d == Delim::kSpace) {
    std::istringstream ss(line);
    std::string cell;
    while (ss >> cell) out.push_back(trim(cell));
    return out;
  }
  const char sep = d == Delim::kComma ? ',' : '\t';
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(std::string_view(line).substr(
        start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct FrameEntry {
  std::int64_t id;
  const TrajectoryRecord* rec;
};

struct Run {
  std::size_t first;
  std::size_t last;
};

double interp(const std::vector<double>& t, const std::vector<double>& y,
              std::size_t& cursor, double at, double tol) {
  while (cursor + 1 < t.size() && t[cursor + 1] <= at + tol) ++cursor;
  if (std::abs(t[cursor] - at) <= tol || cursor + 1 >= t.size()) return y[cursor];
  const double w = (at - t[cursor]) / (t[cursor + 1] - t[cursor]);
  return y[cursor] + w * (y[cursor + 1] - y[cursor]);
}

}  // namespace

ColumnMap ColumnMap::ngsim() {
  ColumnMap m;
  m.time = "Global_Time";
  m.vehicle_id = "Vehicle_ID";
  m.position = "Local_Y";
  m.speed = "v_Vel";
  m.lane_id = "Lane_ID";
  m.preceding_id = "Preceding";
  m.length = "v_Length";
  m.space_headway = "Space_Headway";
  m.time_factor = 0.001;
  m.position_factor = 0.3048;
  m.speed_factor = 0.3048;
  m.length_factor = 0.3048;
  return m;
}

RawTrajectoryTable load_table(std::istream& is, const ColumnMap& map) {
  RawTrajectoryTable table;
  std::string header;
  while (std::getline(is, header)) {
    if (!trim(header).empty()) break;
  }
  if (trim(header).empty()) return table;

  const Delim delim = header.find(',') != std::string::npos    ? Delim::kComma
                      : header.find('\t') != std::string::npos ? Delim::kTab
                                                               : Delim::kSpace;
  const auto names = split(header, delim);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw InvalidArgument(fmt::format("table: missing column '{}'", name));
    }
    return static_cast<std::size_t>(it - names.begin());
  };
  auto required = [&](const std::string& name, const char* field) {
    if (name.empty()) {
      throw InvalidArgument(fmt::format("table: no column mapped for {}", field));
    }
    return *column(name);
  };
  const std::size_t c_time = required(map.time, "time");
  const std::size_t c_id = required(map.vehicle_id, "vehicle_id");
  const std::size_t c_pos = required(map.position, "position");
  const std::size_t c_speed = required(map.speed, "speed");
  const std::size_t c_lane = required(map.lane_id, "lane_id");
  const auto c_prec = column(map.preceding_id);
  const auto c_len = column(map.length);
  const auto c_head = column(map.space_headway);

  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, delim);
    if (cells.size() < names.size()) {
      ++table.skipped_malformed;
      continue;
    }
    auto get = [&](std::size_t c) { return parse_double(cells[c]); };
    const auto t = get(c_time), id = get(c_id), pos = get(c_pos),
               v = get(c_speed), lane = get(c_lane);
    std::optional<double> prec, len, head;
    bool malformed = !t || !id || !pos || !v || !lane;
    if (c_prec) malformed |= !(prec = get(*c_prec));
    if (c_len) malformed |= !(len = get(*c_len));
    if (c_head) malformed |= !(head = get(*c_head));
    if (malformed) {
      ++table.skipped_malformed;
      continue;
    }
    bool ok = std::isfinite(*t) && std::isfinite(*id) && std::isfinite(*pos) &&
              std::isfinite(*v) && std::isfinite(*lane);
    if (prec) ok = ok && std::isfinite(*prec);
    if (len) ok = ok && std::isfinite(*len);
    if (head) ok = ok && std::isfinite(*head);
    if (!ok) {
      ++table.dropped_nonfinite;
      continue;
    }
    TrajectoryRecord r;
    r.time = *t * map.time_factor;
    r.vehicle_id = std::llround(*id);
    r.position = *pos * map.position_factor;
    r.speed = *v * map.speed_factor;
    r.lane_id = std::llround(*lane);
    if (prec) r.preceding_id = std::llround(*prec);
    if (len) r.length = *len * map.length_factor;
    if (head) r.space_headway = *head * map.position_factor;
    table.records.push_back(r);
  }

  auto key = [](const TrajectoryRecord& r) { return std::pair(r.vehicle_id, r.time); };
  std::stable_sort(table.records.begin(), table.records.end(),
                   [&](const auto& a, const auto& b) { return key(a) < key(b); });
  const auto end = std::unique(
      table.records.begin(), table.records.end(),
      [&](const auto& a, const auto& b) { return key(a) == key(b); });
  table.dropped_duplicate = static_cast<std::size_t>(table.records.end() - end);
  table.records.erase(end, table.records.end());
  return table;
}

RawTrajectoryTable load_table(const std::string& path, const ColumnMap& map) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  return load_table(f, map);
}

std::vector<Episode> resample(const Episode& ep, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("resample: dt must be > 0");
  std::vector<Episode> out;
  const std::size_t n = ep.samples();
  if (n == 0) return out;
  const double tol = 1e-9 * dt;

  std::size_t begin = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (k < n && ep.time[k] - ep.time[k - 1] <= 2.0 * dt + tol) continue;
    // Piece [begin, k).
    Episode piece;
    piece.ids = ep.ids;
    piece.dt = dt;
    piece.segment_lo = ep.segment_lo;
    piece.segment_hi = ep.segment_hi;
    piece.lane_id = ep.lane_id;
    const double t0 = ep.time[begin];
    const double t1 = ep.time[k - 1];
    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
    std::vector<double> src_t(ep.time.begin() + static_cast<std::ptrdiff_t>(begin),
                              ep.time.begin() + static_cast<std::ptrdiff_t>(k));
    piece.time.resize(count);
    for (std::size_t j = 0; j < count; ++j) piece.time[j] = t0 + static_cast<double>(j) * dt;

    auto resample_series = [&](const std::vector<std::vector<double>>& series) {
      std::vector<std::vector<double>> res(series.size());
      for (std::size_t v = 0; v < series.size(); ++v) {
        std::vector<double> src(series[v].begin() + static_cast<std::ptrdiff_t>(begin),
                                series[v].begin() + static_cast<std::ptrdiff_t>(k));
        res[v].resize(count);
        std::size_t cursor = 0;
        for (std::size_t j = 0; j < count; ++j) {
          res[v][j] = interp(src_t, src, cursor, piece.time[j], tol);
        }
      }
      return res;
    };
    piece.position = resample_series(ep.position);
    piece.speed = resample_series(ep.speed);
    piece.headway = resample_series(ep.headway);
    out.push_back(std::move(piece));
    begin = k;
  }
  return out;
}

std::vector<Episode> extract_episodes(const RawTrajectoryTable& table,
                                      const ExtractOptions& opts,
                                      ExtractStats* stats) {
  if (!(opts.dt > 0.0)) throw InvalidArgument("extract: dt must be > 0");
  if (!(opts.segment_lo < opts.segment_hi)) {
    throw InvalidArgument("extract: segment bounds must be increasing");
  }
  ExtractStats local;
  ExtractStats& st = stats ? *stats : local;
  std::vector<Episode> out;

  // Frames: distinct timestamps with the lane members inside the segment,
  // ordered front to rear.
  std::map<double, std::vector<FrameEntry>> by_time;
  for (const auto& r : table.records) {
    if (r.lane_id != opts.lane_id) continue;
    if (r.position < opts.segment_lo || r.position > opts.segment_hi) continue;
    by_time[r.time].push_back({r.vehicle_id, &r});
  }
  std::vector<double> times;
  std::vector<std::vector<FrameEntry>> frames;
  for (auto& [t, entries] : by_time) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.rec->position != b.rec->position) return a.rec->position > b.rec->position;
      return a.id < b.id;
    });
    times.push_back(t);
    frames.push_back(std::move(entries));
  }
  const std::size_t nf = frames.size();
  if (nf == 0) return out;
  auto contiguous = [&](std::size_t f) {
    return f > 0 && times[f] - times[f - 1] <= 2.0 * opts.dt * (1.0 + 1e-9);
  };

  // Continuous runs of each direct-follower pair.
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Run>> runs;
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t j = 0; j + 1 < frames[f].size(); ++j) {
      auto& list = runs[{frames[f][j].id, frames[f][j + 1].id}];
      if (!list.empty() && list.back().last + 1 == f && contiguous(f)) {
        list.back().last = f;
      } else {
        list.push_back({f, f});
      }
    }
  }
  auto run_at = [&](std::int64_t a, std::int64_t b, std::size_t f) -> const Run* {
    const auto it = runs.find({a, b});
    if (it == runs.end()) return nullptr;
    for (const auto& r : it->second) {
      if (r.first <= f && f <= r.last) return &r;
    }
    return nullptr;
  };
  auto behind = [&](std::int64_t id, std::size_t f) -> std::optional<std::int64_t> {
    const auto& fr = frames[f];
    for (std::size_t j = 0; j + 1 < fr.size(); ++j) {
      if (fr[j].id == id) return fr[j + 1].id;
    }
    return std::nullopt;
  };
  auto record = [&](std::int64_t id, std::size_t f) -> const TrajectoryRecord* {
    for (const auto& e : frames[f]) {
      if (e.id == id) return e.rec;
    }
    return nullptr;
  };

  std::map<std::int64_t, std::vector<Run>> busy;
  auto is_busy = [&](std::int64_t id, std::size_t f0, std::size_t f1) {
    const auto it = busy.find(id);
    if (it == busy.end()) return false;
    for (const auto& r : it->second) {
      if (r.first <= f1 && f0 <= r.last) return true;
    }
    return false;
  };

  // Candidate heads in time order, front-most pair first.
  struct Head {
    std::size_t first;
    std::size_t last;
    double lead_pos;
    std::int64_t a, b;
  };
  std::vector<Head> heads;
  for (const auto& [pair, list] : runs) {
    for (const auto& r : list) {
      heads.push_back({r.first, r.last, record(pair.first, r.first)->position,
                       pair.first, pair.second});
    }
  }
  std::sort(heads.begin(), heads.end(), [](const Head& x, const Head& y) {
    if (x.first != y.first) return x.first < y.first;
    if (x.lead_pos != y.lead_pos) return x.lead_pos > y.lead_pos;
    return x.a < y.a;
  });

  auto long_enough = [&](std::size_t f0, std::size_t f1) {
    return times[f1] - times[f0] >= opts.min_duration - 1e-9;
  };
  const std::size_t min_chain = std::max<std::size_t>(opts.min_chain, 2);

  for (const auto& head : heads) {
    std::size_t s = head.first;
    while (s <= head.last && long_enough(s, head.last)) {
      if (is_busy(head.a, s, s) || is_busy(head.b, s, s)) {
        ++s;
        continue;
      }
      std::vector<std::int64_t> chain{head.a, head.b};
      std::size_t end = head.last;
      // Trim the window so that neither head member is busy.
      for (auto id : chain) {
        for (std::size_t f = s; f <= end; ++f) {
          if (is_busy(id, f, f)) {
            end = f - 1;
            break;
          }
        }
      }
      while (long_enough(s, end)) {
        const auto next = behind(chain.back(), s);
        if (!next) break;
        const Run* r = run_at(chain.back(), *next, s);
        if (!r) break;
        std::size_t e = std::min(end, r->last);
        for (std::size_t f = s; f <= e; ++f) {
          if (is_busy(*next, f, f)) {
            e = f == s ? s : f - 1;
            break;
          }
        }
        if (is_busy(*next, s, s) || !long_enough(s, e)) break;
        chain.push_back(*next);
        end = e;
      }
      if (chain.size() < min_chain || !long_enough(s, end)) {
        if (chain.size() >= min_chain) ++st.too_short;
        ++s;
        continue;
      }
      ++st.windows;

      Episode raw;
      raw.ids = chain;
      raw.dt = opts.dt;
      raw.segment_lo = opts.segment_lo;
      raw.segment_hi = opts.segment_hi;
      raw.lane_id = opts.lane_id;
      const std::size_t nv = chain.size();
      raw.position.assign(nv, {});
      raw.speed.assign(nv, {});
      raw.headway.assign(nv - 1, {});
      bool positive = true;
      for (std::size_t f = s; f <= end; ++f) {
        raw.time.push_back(times[f]);
        std::vector<const TrajectoryRecord*> recs(nv);
        for (std::size_t v = 0; v < nv; ++v) {
          recs[v] = record(chain[v], f);
          raw.position[v].push_back(recs[v]->position);
          raw.speed[v].push_back(recs[v]->speed);
        }
        for (std::size_t v = 1; v < nv; ++v) {
          const double lead_len = recs[v - 1]->length.value_or(0.0);
          double h = recs[v - 1]->position - recs[v]->position;
          if (opts.use_dataset_headway && recs[v]->space_headway) {
            h = *recs[v]->space_headway;
          }
          h -= lead_len;
          positive = positive && h > 0.0;
          raw.headway[v - 1].push_back(h);
        }
      }
      for (auto id : chain) busy[id].push_back({s, end});
      if (!positive) {
        ++st.nonpositive_headway;
      } else {
        for (auto& piece : resample(raw, opts.dt)) {
          if (piece.duration() >= opts.min_duration - 1e-9) {
            out.push_back(std::move(piece));
          } else {
            ++st.too_short;
          }
        }
      }
      s = end + 1;
    }
  }
  std::sort(out.begin(), out.end(), [](const Episode& x, const Episode& y) {
    if (x.time.front() != y.time.front()) return x.time.front() < y.time.front();
    return x.ids < y.ids;
  });
  return out;
}

std::optional<std::string> check_episode(const Episode& ep) {
  const std::size_t nv = ep.ids.size();
  const std::size_t ns = ep.time.size();
  if (nv < 2) return "episode needs a lead and at least one follower";
  if (ns < 2) return "episode needs at least two samples";
  if (ep.position.size() != nv || ep.speed.size() != nv || ep.headway.size() != nv - 1) {
    return "series count does not match the chain";
  }
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t u = v + 1; u < nv; ++u) {
      if (ep.ids[v] == ep.ids[u]) return "vehicle listed twice";
    }
    if (ep.position[v].size() != ns || ep.speed[v].size() != ns) {
      return fmt::format("vehicle {} series length mismatch", ep.ids[v]);
    }
  }
  for (std::size_t k = 1; k < ns; ++k) {
    if (std::abs(ep.time[k] - ep.time[k - 1] - ep.dt) > 1e-6 * ep.dt) {
      return fmt::format("non-uniform sampling at sample {}", k);
    }
  }
  for (std::size_t k = 0; k < ns; ++k) {
    for (std::size_t v = 0; v < nv; ++v) {
      const double p = ep.position[v][k];
      if (!std::isfinite(p) || !std::isfinite(ep.speed[v][k])) {
        return fmt::format("non-finite value at sample {}", k);
      }
      if (p < ep.segment_lo - 1e-9 || p > ep.segment_hi + 1e-9) {
        return fmt::format("vehicle {} outside the segment at sample {}", ep.ids[v], k);
      }
      if (v > 0) {
        if (!(ep.position[v - 1][k] > p)) {
          return fmt::format("ordering violated at sample {}", k);
        }
        if (ep.headway[v - 1].size() != ns) return "headway series length mismatch";
        if (!(ep.headway[v - 1][k] > 0.0)) {
          return fmt::format("non-positive headway at sample {}", k);
        }
      }
    }
  }
  return std::nullopt;
}

TrajectorySet to_trajectory(const Episode& ep) {
  if (auto err = check_episode(ep)) {
    throw InvalidArgument("episode invalid: " + *err);
  }
  TrajectorySet t;
  t.time = ep.time;
  t.ghost = ep.speed[0];
  for (std::size_t v = 1; v < ep.vehicles(); ++v) {
    t.speed.push_back(ep.speed[v]);
    t.headway.push_back(ep.headway[v - 1]);
    t.accel.push_back(finite_difference_accel(ep.speed[v], ep.dt));
  }
  return t;
}

}  // namespace msdc
