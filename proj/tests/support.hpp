#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "bushold/corridor.hpp"

namespace bushold::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("bushold-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Deterministic corridor: no passengers, no speed noise, a constant speed on
/// every segment, and `departures` trips per direction.
inline ScenarioConfig quiet_scenario(int up_departures, int down_departures, double speed = 10.0,
                                     int interval = 360) {
  ScenarioConfig sc = generate_synthetic_scenario(1);
  for (auto& m : sc.od_matrices)
    for (auto& row : m.rates) row.fill(0.0);
  for (auto& p : sc.speed_profiles) p.hourly_mean.fill(speed);
  sc.speed_sigma = 0.0;
  sc.dispatch_interval_secs = interval;
  sc.timetables[to_int(Direction::Up)] = generate_timetable(interval, 0, interval * up_departures, Direction::Up);
  sc.timetables[to_int(Direction::Down)] =
      generate_timetable(interval, 0, interval * down_departures, Direction::Down);
  return sc;
}

}  // namespace bushold::testing
