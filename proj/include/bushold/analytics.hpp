#pragma once

#include <array>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "bushold/corridor.hpp"
#include "bushold/simulator.hpp"

namespace bushold {

inline constexpr double kDefaultBunchingThreshold = 90.0;
inline constexpr int kTopStops = 7;

/// Two consecutive service completions at one (stop, direction) closer than the threshold.
struct BunchingEvent {
  double time = 0.0;  // trailing bus completion
  int hour = 0;
  int stop = 0;
  Direction direction = Direction::Up;
  int leading_bus = 0;
  int trailing_bus = 0;
  double gap = 0.0;

  bool operator==(const BunchingEvent&) const = default;
};

/// One event per consecutive completion pair with gap < threshold.
std::vector<BunchingEvent> detect_bunching(const EpisodeLog& log, double threshold = kDefaultBunchingThreshold);

struct BunchingStats {
  /// [direction][stop]
  std::array<std::array<int, kNumStops>, 2> per_stop{};
  /// [direction][hour]
  std::array<std::array<int, kNumHours>, 2> per_hour{};
  /// [direction] -> (stop, count), descending count, ties by stop index.
  std::array<std::vector<std::pair<int, int>>, 2> top_stops;
  std::array<int, 2> total{};
};

BunchingStats bunching_stats(std::span<const BunchingEvent> events);

enum class SmoothKind { Rolling10, Ewm03 };

/// rolling10: trailing mean over min(10, i+1) points.
/// ewm03: s0 = x0, s_t = 0.3 x_t + 0.7 s_{t-1}.
std::vector<double> smooth(std::span<const double> series, SmoothKind kind);

double mean_of(std::span<const double> xs);
/// Sample standard deviation (n-1); 0 for fewer than two points.
double sample_std(std::span<const double> xs);

void write_bunching_csv(std::ostream& out, std::span<const BunchingEvent> events);
void write_bunching_by_hour_csv(std::ostream& out, const BunchingStats& stats);
void write_bunching_by_stop_csv(std::ostream& out, const BunchingStats& stats);
/// Columns episode,raw,rolling10,ewm03.
void write_reward_curve_csv(std::ostream& out, std::span<const double> rewards);
/// Columns bus_id,time_s,position_m,stop,direction, grouped by bus in time order.
void write_trajectories_csv(std::ostream& out, const EpisodeLog& log, const ScenarioConfig& scenario);

}  // namespace bushold
