#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bushold {

inline constexpr int kNumStops = 22;
inline constexpr int kNumSegments = kNumStops - 1;
inline constexpr int kNumHours = 13;
inline constexpr int kTerminalUp = 0;
inline constexpr int kTerminalDown = kNumStops - 1;
inline constexpr double kSecondsPerHour = 3600.0;
inline constexpr int kOperatingWindowSecs = kNumHours * 3600;

/// Travel direction. `Up` runs terminal_up (stop 0) to terminal_down (stop 21).
enum class Direction : int { Down = 0, Up = 1 };

inline int to_int(Direction d) { return static_cast<int>(d); }
inline Direction direction_from_int(int v) { return v == 1 ? Direction::Up : Direction::Down; }

/// Origin / destination terminal of a trip in the given direction.
inline int origin_terminal(Direction d) { return d == Direction::Up ? kTerminalUp : kTerminalDown; }
inline int destination_terminal(Direction d) { return d == Direction::Up ? kTerminalDown : kTerminalUp; }
/// Next stop index in travel order.
inline int next_stop(Direction d, int stop) { return d == Direction::Up ? stop + 1 : stop - 1; }
/// Index of the segment joining `stop` and its successor in travel order.
inline int segment_after(Direction d, int stop) { return d == Direction::Up ? stop : stop - 1; }
inline bool is_intermediate(int stop) { return stop > kTerminalUp && stop < kTerminalDown; }
/// Last intermediate stop visited on a trip.
inline int final_intermediate_stop(Direction d) { return d == Direction::Up ? kTerminalDown - 1 : kTerminalUp + 1; }

/// Hour bin of a simulation time: floor(t / 3600), clamped to [0, 12].
int hour_index(double sim_time);

enum class StopKind { TerminalUp, Intermediate, TerminalDown };

std::string to_string(StopKind kind);
StopKind stop_kind_from_string(const std::string& s);

struct StopSpec {
  int stop_index = 0;
  StopKind kind = StopKind::Intermediate;
  double position_m = 0.0;

  bool operator==(const StopSpec&) const = default;
};

/// Hourly expected origin-destination flows, pax/hour.
struct OdMatrix {
  int hour = 0;
  std::array<std::array<double, kNumStops>, kNumStops> rates{};

  bool operator==(const OdMatrix&) const = default;
};

struct SpeedProfile {
  int segment_index = 0;
  std::array<double, kNumHours> hourly_mean{};

  bool operator==(const SpeedProfile&) const = default;
};

struct Timetable {
  Direction direction = Direction::Up;
  int interval_secs = 360;
  std::vector<int> departures;

  bool operator==(const Timetable&) const = default;
};

struct ScenarioConfig {
  std::vector<StopSpec> stops;
  std::vector<OdMatrix> od_matrices;
  std::vector<SpeedProfile> speed_profiles;
  /// Indexed by `to_int(Direction)`.
  std::array<Timetable, 2> timetables;

  double speed_sigma = 1.5;
  double dwell_board_secs = 2.0;
  double dwell_alight_secs = 1.0;
  int bus_capacity = 80;
  double max_hold_secs = 60.0;
  double target_headway_secs = 360.0;
  std::uint64_t rng_seed = 0;
  int dispatch_interval_secs = 360;
  /// Size of the bus-id vocabulary; dispatching more vehicles is a scenario error.
  int max_fleet = 40;

  const Timetable& timetable(Direction d) const { return timetables[to_int(d)]; }
  double segment_length(int segment) const;
  double mean_speed(int segment, int hour) const;
  double od_rate(int hour, int from, int to) const;

  /// Throws ValidationError if any type invariant fails.
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Departures offset, offset + interval, ... strictly below horizon.
Timetable generate_timetable(int interval_secs, int offset_secs, int horizon_secs,
                             Direction direction = Direction::Up);

/// Evenly spaced stops (default 800 m apart).
std::vector<StopSpec> uniform_stops(double spacing_m = 800.0);

/// Peak-shaped multiplier over the 13 hour bins; 1 off-peak, up to 4 at hours 3 and 11.
double demand_hour_factor(int hour);

/// Corridor-wide speed before per-segment variation; 12 m/s off-peak, 6 m/s at the peaks.
double base_speed_for_hour(int hour);

/// Synthetic two-peak scenario, deterministic in `seed`.
ScenarioConfig generate_synthetic_scenario(std::uint64_t seed);

/// Reads stops.csv, od.csv, speeds.csv, timetable.csv and scenario.cfg from `dir`.
ScenarioConfig load_scenario(const std::filesystem::path& dir);

/// Writes the five scenario files into `dir` (created if needed).
void save_scenario(const ScenarioConfig& scenario, const std::filesystem::path& dir);

/// Sum of all intermediate-stop OD rates in one hour bin.
double total_demand(const ScenarioConfig& scenario, int hour);

/// Average of segment mean speeds in one hour bin.
double corridor_mean_speed(const ScenarioConfig& scenario, int hour);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace bushold
