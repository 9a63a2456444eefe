#include "bushold/corridor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "bushold/error.hpp"
#include "bushold/random.hpp"

namespace bushold {

namespace {

constexpr double kBaseDemandPerPair = 10.0;
constexpr double kPeakDemandBoost = 3.0;  // factor 1 + 3 = 4 at the peak
constexpr double kBaseSpeed = 12.0;
constexpr double kPeakSpeedDrop = 6.0;
// Bump widths (hours) before and after each peak centre. Demand surges
// shortly before a peak and drops away quickly; congestion builds over
// several hours and eases more slowly.
constexpr double kDemandRiseHours = 1.0;
constexpr double kDemandFallHours = 0.4;
constexpr double kSpeedRiseHours = 4.0;
constexpr double kSpeedFallHours = 2.0;
constexpr std::array<double, 2> kPeakHours{3.0, 11.0};
// Fraction of intermediate OD pairs carrying demand in a synthetic scenario.
constexpr double kActivePairFraction = 0.15;
constexpr double kSegmentSpeedJitter = 0.1;

// Height in [0, 1] of the nearer peak at `hour`; exactly 1 only at a peak centre.
double peak_profile(int hour, double rise, double fall) {
  double best = 0.0;
  for (double c : kPeakHours) {
    const double d = (hour - c) / (hour < c ? rise : fall);
    best = std::max(best, std::exp(-0.5 * d * d));
  }
  return best;
}

// ---- CSV helpers --------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = field.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? std::string{} : field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  // (line number, fields)
  std::vector<std::pair<int, std::vector<std::string>>> rows;
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  const std::string name = path.filename().string();
  if (!in) throw LoadError("cannot open " + name + " (" + path.string() + ")");
  CsvTable table;
  table.file = name;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = fields;
      if (table.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ValidationError(name + " line " + std::to_string(line_no) + ": expected header '" + want + "'");
      }
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw ValidationError(name + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_header.size()) + " columns, got " +
                            std::to_string(fields.size()));
    }
    table.rows.emplace_back(line_no, std::move(fields));
  }
  if (table.header.empty()) throw ValidationError(name + ": missing header");
  return table;
}

[[noreturn]] void cell_error(const CsvTable& t, int line, std::size_t col, const std::string& what) {
  throw ValidationError(t.file + " line " + std::to_string(line) + " column " + t.header[col] + ": " + what);
}

double parse_double_cell(const CsvTable& t, int line, std::size_t col, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    cell_error(t, line, col, "not a finite number: '" + s + "'");
  }
  return v;
}

long long parse_int_cell(const CsvTable& t, int line, std::size_t col, const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) cell_error(t, line, col, "not an integer: '" + s + "'");
  return v;
}

std::filesystem::path require_file(const std::filesystem::path& dir, const std::string& name) {
  auto p = dir / name;
  if (!std::filesystem::is_regular_file(p)) throw LoadError("missing scenario file " + name + " in " + dir.string());
  return p;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
  if (!out) throw LoadError("write failed for " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

int hour_index(double sim_time) {
  if (!(sim_time > 0.0)) return 0;
  const int h = static_cast<int>(std::floor(sim_time / kSecondsPerHour));
  return std::min(h, kNumHours - 1);
}

std::string to_string(StopKind kind) {
  switch (kind) {
    case StopKind::TerminalUp: return "terminal_up";
    case StopKind::Intermediate: return "intermediate";
    case StopKind::TerminalDown: return "terminal_down";
  }
  return "intermediate";
}

StopKind stop_kind_from_string(const std::string& s) {
  if (s == "terminal_up") return StopKind::TerminalUp;
  if (s == "intermediate") return StopKind::Intermediate;
  if (s == "terminal_down") return StopKind::TerminalDown;
  throw ValidationError("unknown stop kind '" + s + "'");
}

double ScenarioConfig::segment_length(int segment) const {
  return stops.at(segment + 1).position_m - stops.at(segment).position_m;
}

double ScenarioConfig::mean_speed(int segment, int hour) const {
  return speed_profiles.at(segment).hourly_mean.at(hour);
}

double ScenarioConfig::od_rate(int hour, int from, int to) const {
  return od_matrices.at(hour).rates.at(from).at(to);
}

void ScenarioConfig::validate() const {
  if (stops.size() != kNumStops) {
    throw ValidationError("stops: expected 22 stops, got " + std::to_string(stops.size()));
  }
  for (int i = 0; i < kNumStops; ++i) {
    const auto& s = stops[i];
    if (s.stop_index != i) throw ValidationError("stops row " + std::to_string(i) + ": index out of order");
    const StopKind want = i == kTerminalUp     ? StopKind::TerminalUp
                          : i == kTerminalDown ? StopKind::TerminalDown
                                               : StopKind::Intermediate;
    if (s.kind != want) {
      throw ValidationError("stops row " + std::to_string(i) + ": kind must be " + to_string(want));
    }
    if (!std::isfinite(s.position_m)) throw ValidationError("stops row " + std::to_string(i) + ": bad position");
    if (i > 0 && !(s.position_m > stops[i - 1].position_m)) {
      throw ValidationError("stops row " + std::to_string(i) + ": positions must be strictly increasing");
    }
  }

  if (od_matrices.size() != kNumHours) {
    throw ValidationError("od: expected 13 hourly matrices, got " + std::to_string(od_matrices.size()));
  }
  for (int h = 0; h < kNumHours; ++h) {
    const auto& m = od_matrices[h];
    if (m.hour != h) throw ValidationError("od: matrix " + std::to_string(h) + " has hour " + std::to_string(m.hour));
    for (int i = 0; i < kNumStops; ++i) {
      for (int j = 0; j < kNumStops; ++j) {
        const double r = m.rates[i][j];
        const std::string where = "od hour " + std::to_string(h) + " from " + std::to_string(i) + " to " + std::to_string(j);
        if (!std::isfinite(r) || r < 0.0) throw ValidationError(where + ": rate must be finite and non-negative");
        if (r != 0.0 && i == j) throw ValidationError(where + ": diagonal must be zero");
        if (r != 0.0 && (!is_intermediate(i) || !is_intermediate(j))) {
          throw ValidationError(where + ": terminal rows and columns must be zero");
        }
      }
    }
  }

  if (speed_profiles.size() != kNumSegments) {
    throw ValidationError("speeds: expected 21 segments, got " + std::to_string(speed_profiles.size()));
  }
  for (int s = 0; s < kNumSegments; ++s) {
    const auto& p = speed_profiles[s];
    if (p.segment_index != s) throw ValidationError("speeds: segment " + std::to_string(s) + " out of order");
    for (int h = 0; h < kNumHours; ++h) {
      if (!(p.hourly_mean[h] > 0.0) || !std::isfinite(p.hourly_mean[h])) {
        throw ValidationError("speeds segment " + std::to_string(s) + " hour " + std::to_string(h) +
                              ": mean speed must be positive");
      }
    }
  }

  if (dispatch_interval_secs <= 0) throw ValidationError("scenario.cfg: dispatch_interval_secs must be positive");
  for (int d = 0; d < 2; ++d) {
    const auto& tt = timetables[d];
    const std::string where = "timetable direction " + std::to_string(d);
    if (to_int(tt.direction) != d) throw ValidationError(where + ": direction mismatch");
    if (tt.interval_secs != dispatch_interval_secs) {
      throw ValidationError(where + ": interval differs from dispatch_interval_secs");
    }
    for (std::size_t k = 0; k < tt.departures.size(); ++k) {
      const int t = tt.departures[k];
      if (t < 0 || t >= kOperatingWindowSecs) {
        throw ValidationError(where + " row " + std::to_string(k) + ": departure outside [0, 46800)");
      }
      if (k > 0 && t - tt.departures[k - 1] != dispatch_interval_secs) {
        throw ValidationError(where + " row " + std::to_string(k) + ": gap " +
                              std::to_string(t - tt.departures[k - 1]) + " differs from interval " +
                              std::to_string(dispatch_interval_secs));
      }
    }
  }

  if (!(speed_sigma >= 0.0)) throw ValidationError("scenario.cfg: speed_sigma must be >= 0");
  if (!(max_hold_secs > 0.0)) throw ValidationError("scenario.cfg: max_hold_secs must be > 0");
  if (!(target_headway_secs > 0.0)) throw ValidationError("scenario.cfg: target_headway_secs must be > 0");
  if (!(dwell_board_secs >= 0.0) || !(dwell_alight_secs >= 0.0)) {
    throw ValidationError("scenario.cfg: dwell times must be >= 0");
  }
  if (bus_capacity < 1) throw ValidationError("scenario.cfg: bus_capacity must be >= 1");
  if (max_fleet < 1) throw ValidationError("scenario.cfg: max_fleet must be >= 1");
}

Timetable generate_timetable(int interval_secs, int offset_secs, int horizon_secs, Direction direction) {
  if (interval_secs <= 0) throw ArgumentError("generate_timetable: interval must be positive");
  if (offset_secs < 0 || offset_secs >= interval_secs) {
    throw ArgumentError("generate_timetable: offset must lie in [0, interval)");
  }
  Timetable tt;
  tt.direction = direction;
  tt.interval_secs = interval_secs;
  for (int t = offset_secs; t < horizon_secs; t += interval_secs) tt.departures.push_back(t);
  return tt;
}

std::vector<StopSpec> uniform_stops(double spacing_m) {
  std::vector<StopSpec> stops(kNumStops);
  for (int i = 0; i < kNumStops; ++i) {
    stops[i].stop_index = i;
    stops[i].kind = i == kTerminalUp     ? StopKind::TerminalUp
                    : i == kTerminalDown ? StopKind::TerminalDown
                                         : StopKind::Intermediate;
    stops[i].position_m = spacing_m * i;
  }
  return stops;
}

double demand_hour_factor(int hour) { return 1.0 + kPeakDemandBoost * peak_profile(hour, kDemandRiseHours, kDemandFallHours); }

double base_speed_for_hour(int hour) {
  return kBaseSpeed - kPeakSpeedDrop * peak_profile(hour, kSpeedRiseHours, kSpeedFallHours);
}

ScenarioConfig generate_synthetic_scenario(std::uint64_t seed) {
  ScenarioConfig sc;
  sc.rng_seed = seed;
  sc.stops = uniform_stops();

  RngStream rng(seed, StreamId::Scenario);
  std::array<std::array<bool, kNumStops>, kNumStops> active{};
  for (int i = 1; i < kTerminalDown; ++i) {
    for (int j = 1; j < kTerminalDown; ++j) {
      const double u = rng.uniform();
      active[i][j] = i != j && u < kActivePairFraction;
    }
  }
  sc.od_matrices.resize(kNumHours);
  for (int h = 0; h < kNumHours; ++h) {
    auto& m = sc.od_matrices[h];
    m.hour = h;
    const double rate = kBaseDemandPerPair * demand_hour_factor(h);
    for (int i = 0; i < kNumStops; ++i)
      for (int j = 0; j < kNumStops; ++j) m.rates[i][j] = active[i][j] ? rate : 0.0;
  }

  sc.speed_profiles.resize(kNumSegments);
  for (int s = 0; s < kNumSegments; ++s) {
    auto& p = sc.speed_profiles[s];
    p.segment_index = s;
    const double jitter = 1.0 + kSegmentSpeedJitter * (2.0 * rng.uniform() - 1.0);
    for (int h = 0; h < kNumHours; ++h) p.hourly_mean[h] = base_speed_for_hour(h) * jitter;
  }

  sc.dispatch_interval_secs = 360;
  sc.timetables[to_int(Direction::Up)] = generate_timetable(360, 0, kOperatingWindowSecs, Direction::Up);
  sc.timetables[to_int(Direction::Down)] = generate_timetable(360, 180, kOperatingWindowSecs, Direction::Down);
  sc.validate();
  return sc;
}

double total_demand(const ScenarioConfig& scenario, int hour) {
  double total = 0.0;
  for (const auto& row : scenario.od_matrices.at(hour).rates)
    for (double r : row) total += r;
  return total;
}

double corridor_mean_speed(const ScenarioConfig& scenario, int hour) {
  double total = 0.0;
  for (const auto& p : scenario.speed_profiles) total += p.hourly_mean.at(hour);
  return total / static_cast<double>(scenario.speed_profiles.size());
}

ScenarioConfig load_scenario(const std::filesystem::path& dir) {
  const auto stops_path = require_file(dir, "stops.csv");
  const auto od_path = require_file(dir, "od.csv");
  const auto speeds_path = require_file(dir, "speeds.csv");
  const auto tt_path = require_file(dir, "timetable.csv");
  const auto cfg_path = require_file(dir, "scenario.cfg");

  ScenarioConfig sc;

  // scenario.cfg first: the timetable check needs the interval.
  {
    std::ifstream in(cfg_path);
    if (!in) throw LoadError("cannot open scenario.cfg");
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("scenario.cfg line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto number = [&](const std::string& key, bool required) -> std::optional<double> {
      auto it = kv.find(key);
      if (it == kv.end()) {
        if (required) throw ValidationError("scenario.cfg: missing key " + key);
        return std::nullopt;
      }
      double v = 0.0;
      const auto& s = it->second;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ValidationError("scenario.cfg: key " + key + " is not a finite number");
      }
      kv.erase(it);
      return v;
    };
    sc.speed_sigma = *number("speed_sigma", true);
    sc.dwell_board_secs = *number("dwell_board_secs", true);
    sc.dwell_alight_secs = *number("dwell_alight_secs", true);
    sc.bus_capacity = static_cast<int>(*number("bus_capacity", true));
    sc.max_hold_secs = *number("max_hold_secs", true);
    sc.target_headway_secs = *number("target_headway_secs", true);
    {
      auto it = kv.find("rng_seed");
      if (it == kv.end()) throw ValidationError("scenario.cfg: missing key rng_seed");
      std::uint64_t seed = 0;
      const auto& s = it->second;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("scenario.cfg: rng_seed must be a non-negative integer");
      }
      sc.rng_seed = seed;
      kv.erase(it);
    }
    if (auto v = number("dispatch_interval_secs", false)) sc.dispatch_interval_secs = static_cast<int>(*v);
    if (auto v = number("max_fleet", false)) sc.max_fleet = static_cast<int>(*v);
    if (!kv.empty()) throw ValidationError("scenario.cfg: unknown key " + kv.begin()->first);
  }

  {
    const auto t = read_csv(stops_path, {"index", "kind", "position_m"});
    if (t.rows.size() != kNumStops) {
      throw ValidationError("stops.csv: expected 22 rows, got " + std::to_string(t.rows.size()));
    }
    sc.stops.resize(kNumStops);
    std::array<bool, kNumStops> seen{};
    for (const auto& [line, f] : t.rows) {
      const auto idx = parse_int_cell(t, line, 0, f[0]);
      if (idx < 0 || idx >= kNumStops) cell_error(t, line, 0, "stop index out of range");
      StopSpec& s = sc.stops[idx];
      if (seen[idx]) cell_error(t, line, 0, "duplicate stop index");
      seen[idx] = true;
      s.stop_index = static_cast<int>(idx);
      try {
        s.kind = stop_kind_from_string(f[1]);
      } catch (const ValidationError& e) {
        cell_error(t, line, 1, e.what());
      }
      s.position_m = parse_double_cell(t, line, 2, f[2]);
    }
  }

  {
    const auto t = read_csv(od_path, {"hour", "from", "to", "rate_per_hour"});
    sc.od_matrices.resize(kNumHours);
    for (int h = 0; h < kNumHours; ++h) sc.od_matrices[h].hour = h;
    for (const auto& [line, f] : t.rows) {
      const auto h = parse_int_cell(t, line, 0, f[0]);
      if (h < 0 || h >= kNumHours) cell_error(t, line, 0, "hour out of range");
      const auto from = parse_int_cell(t, line, 1, f[1]);
      if (from < 0 || from >= kNumStops) cell_error(t, line, 1, "stop out of range");
      const auto to = parse_int_cell(t, line, 2, f[2]);
      if (to < 0 || to >= kNumStops) cell_error(t, line, 2, "stop out of range");
      const double rate = parse_double_cell(t, line, 3, f[3]);
      if (rate < 0.0) cell_error(t, line, 3, "rate must be non-negative");
      if (rate != 0.0 && from == to) cell_error(t, line, 3, "diagonal rate must be zero");
      if (rate != 0.0 && (!is_intermediate(static_cast<int>(from)) || !is_intermediate(static_cast<int>(to)))) {
        cell_error(t, line, !is_intermediate(static_cast<int>(from)) ? 1 : 2,
                   "terminal rows and columns must be zero");
      }
      sc.od_matrices[h].rates[from][to] = rate;
    }
  }

  {
    const auto t = read_csv(speeds_path, {"segment", "hour", "mean_mps"});
    if (t.rows.size() != static_cast<std::size_t>(kNumSegments * kNumHours)) {
      throw ValidationError("speeds.csv: expected 273 rows, got " + std::to_string(t.rows.size()));
    }
    sc.speed_profiles.resize(kNumSegments);
    std::array<std::array<bool, kNumHours>, kNumSegments> seen{};
    for (int s = 0; s < kNumSegments; ++s) sc.speed_profiles[s].segment_index = s;
    for (const auto& [line, f] : t.rows) {
      const auto seg = parse_int_cell(t, line, 0, f[0]);
      if (seg < 0 || seg >= kNumSegments) cell_error(t, line, 0, "segment out of range");
      const auto h = parse_int_cell(t, line, 1, f[1]);
      if (h < 0 || h >= kNumHours) cell_error(t, line, 1, "hour out of range");
      if (seen[seg][h]) cell_error(t, line, 1, "duplicate (segment, hour)");
      seen[seg][h] = true;
      const double v = parse_double_cell(t, line, 2, f[2]);
      if (!(v > 0.0)) cell_error(t, line, 2, "mean speed must be positive");
      sc.speed_profiles[seg].hourly_mean[h] = v;
    }
  }

  {
    const auto t = read_csv(tt_path, {"direction", "departure_s"});
    for (int d = 0; d < 2; ++d) {
      sc.timetables[d].direction = direction_from_int(d);
      sc.timetables[d].interval_secs = sc.dispatch_interval_secs;
    }
    for (const auto& [line, f] : t.rows) {
      const auto d = parse_int_cell(t, line, 0, f[0]);
      if (d != 0 && d != 1) cell_error(t, line, 0, "direction must be 0 or 1");
      const auto dep = parse_int_cell(t, line, 1, f[1]);
      auto& deps = sc.timetables[d].departures;
      if (dep < 0 || dep >= kOperatingWindowSecs) cell_error(t, line, 1, "departure outside [0, 46800)");
      if (!deps.empty() && dep <= deps.back()) cell_error(t, line, 1, "departures must be sorted ascending");
      if (!deps.empty() && dep - deps.back() != sc.dispatch_interval_secs) {
        cell_error(t, line, 1,
                   "gap " + std::to_string(dep - deps.back()) + " differs from dispatch interval " +
                       std::to_string(sc.dispatch_interval_secs));
      }
      deps.push_back(static_cast<int>(dep));
    }
  }

  sc.validate();
  return sc;
}

void save_scenario(const ScenarioConfig& sc, const std::filesystem::path& dir) {
  sc.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw LoadError("cannot create directory " + dir.string() + ": " + ec.message());

  std::string stops = "index,kind,position_m\n";
  for (const auto& s : sc.stops) {
    stops += std::to_string(s.stop_index) + "," + to_string(s.kind) + "," + format_double(s.position_m) + "\n";
  }
  write_text_file(dir / "stops.csv", stops);

  std::string od = "hour,from,to,rate_per_hour\n";
  for (const auto& m : sc.od_matrices)
    for (int i = 0; i < kNumStops; ++i)
      for (int j = 0; j < kNumStops; ++j)
        if (m.rates[i][j] != 0.0) {
          od += std::to_string(m.hour) + "," + std::to_string(i) + "," + std::to_string(j) + "," +
                format_double(m.rates[i][j]) + "\n";
        }
  write_text_file(dir / "od.csv", od);

  std::string speeds = "segment,hour,mean_mps\n";
  for (const auto& p : sc.speed_profiles)
    for (int h = 0; h < kNumHours; ++h) {
      speeds += std::to_string(p.segment_index) + "," + std::to_string(h) + "," + format_double(p.hourly_mean[h]) + "\n";
    }
  write_text_file(dir / "speeds.csv", speeds);

  std::string tt = "direction,departure_s\n";
  for (const auto& t : sc.timetables)
    for (int dep : t.departures) tt += std::to_string(to_int(t.direction)) + "," + std::to_string(dep) + "\n";
  write_text_file(dir / "timetable.csv", tt);

  std::string cfg;
  cfg += "speed_sigma = " + format_double(sc.speed_sigma) + "\n";
  cfg += "dwell_board_secs = " + format_double(sc.dwell_board_secs) + "\n";
  cfg += "dwell_alight_secs = " + format_double(sc.dwell_alight_secs) + "\n";
  cfg += "bus_capacity = " + std::to_string(sc.bus_capacity) + "\n";
  cfg += "max_hold_secs = " + format_double(sc.max_hold_secs) + "\n";
  cfg += "target_headway_secs = " + format_double(sc.target_headway_secs) + "\n";
  cfg += "rng_seed = " + std::to_string(sc.rng_seed) + "\n";
  cfg += "dispatch_interval_secs = " + std::to_string(sc.dispatch_interval_secs) + "\n";
  cfg += "max_fleet = " + std::to_string(sc.max_fleet) + "\n";
  write_text_file(dir / "scenario.cfg", cfg);
}

}  // namespace bushold
