#include "bushold/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "bushold/error.hpp"

namespace bushold {

std::vector<BunchingEvent> detect_bunching(const EpisodeLog& log, double threshold) {
  std::vector<BunchingEvent> events;
  std::array<std::array<const EventRecord*, kNumStops>, 2> last{};
  for (const auto& r : log.records) {
    if (r.kind != EventKind::ServiceComplete) continue;
    const EventRecord*& prev = last[to_int(r.direction)][r.stop];
    if (prev != nullptr && prev->bus_id != r.bus_id) {
      const double gap = r.time - prev->time;
      if (gap < threshold) {
        BunchingEvent e;
        e.time = r.time;
        e.hour = hour_index(r.time);
        e.stop = r.stop;
        e.direction = r.direction;
        e.leading_bus = prev->bus_id;
        e.trailing_bus = r.bus_id;
        e.gap = gap;
        events.push_back(e);
      }
    }
    prev = &r;
  }
  return events;
}

BunchingStats bunching_stats(std::span<const BunchingEvent> events) {
  BunchingStats s;
  for (const auto& e : events) {
    const int d = to_int(e.direction);
    ++s.per_stop[d].at(e.stop);
    ++s.per_hour[d].at(e.hour);
    ++s.total[d];
  }
  for (int d = 0; d < 2; ++d) {
    std::vector<std::pair<int, int>> ranked;
    for (int stop = 0; stop < kNumStops; ++stop) ranked.emplace_back(stop, s.per_stop[d][stop]);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(kTopStops);
    s.top_stops[d] = std::move(ranked);
  }
  return s;
}

std::vector<double> smooth(std::span<const double> series, SmoothKind kind) {
  if (series.empty()) throw ArgumentError("smooth: empty series");
  std::vector<double> out(series.size());
  if (kind == SmoothKind::Rolling10) {
    constexpr std::size_t window = 10;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const std::size_t start = i + 1 >= window ? i + 1 - window : 0;
      double sum = 0.0;
      for (std::size_t k = start; k <= i; ++k) sum += series[k];
      out[i] = sum / static_cast<double>(i + 1 - start);
    }
  } else {
    out[0] = series[0];
    for (std::size_t i = 1; i < series.size(); ++i) out[i] = 0.3 * series[i] + 0.7 * out[i - 1];
  }
  return out;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

void write_bunching_csv(std::ostream& out, std::span<const BunchingEvent> events) {
  out << "time_s,hour,stop,direction,leading_bus,trailing_bus,gap_s\n";
  for (const auto& e : events) {
    out << format_double(e.time) << ',' << e.hour << ',' << e.stop << ',' << to_int(e.direction) << ','
        << e.leading_bus << ',' << e.trailing_bus << ',' << format_double(e.gap) << '\n';
  }
}

void write_bunching_by_hour_csv(std::ostream& out, const BunchingStats& stats) {
  out << "direction,hour,count\n";
  for (int d = 0; d < 2; ++d)
    for (int h = 0; h < kNumHours; ++h) out << d << ',' << h << ',' << stats.per_hour[d][h] << '\n';
}

void write_bunching_by_stop_csv(std::ostream& out, const BunchingStats& stats) {
  out << "direction,stop,count,top7_rank\n";
  for (int d = 0; d < 2; ++d) {
    for (int stop = 0; stop < kNumStops; ++stop) {
      int rank = 0;
      for (std::size_t k = 0; k < stats.top_stops[d].size(); ++k)
        if (stats.top_stops[d][k].first == stop) rank = static_cast<int>(k) + 1;
      out << d << ',' << stop << ',' << stats.per_stop[d][stop] << ',';
      if (rank > 0) out << rank;
      out << '\n';
    }
  }
}

void write_reward_curve_csv(std::ostream& out, std::span<const double> rewards) {
  out << "episode,raw,rolling10,ewm03\n";
  if (rewards.empty()) return;
  const auto roll = smooth(rewards, SmoothKind::Rolling10);
  const auto ewm = smooth(rewards, SmoothKind::Ewm03);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out << i << ',' << format_double(rewards[i]) << ',' << format_double(roll[i]) << ',' << format_double(ewm[i])
        << '\n';
  }
}

void write_trajectories_csv(std::ostream& out, const EpisodeLog& log, const ScenarioConfig& scenario) {
  std::map<int, std::vector<const EventRecord*>> by_bus;
  for (const auto& r : log.records) {
    if (r.kind == EventKind::Warning || r.stop < 0) continue;
    by_bus[r.bus_id].push_back(&r);
  }
  out << "bus_id,time_s,position_m,stop,direction\n";
  for (const auto& [bus, recs] : by_bus) {
    for (const EventRecord* r : recs) {
      out << bus << ',' << format_double(r->time) << ',' << format_double(scenario.stops.at(r->stop).position_m)
          << ',' << r->stop << ',' << to_int(r->direction) << '\n';
    }
  }
}

}  // namespace bushold
