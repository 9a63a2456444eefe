#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "bushold/corridor.hpp"
#include "bushold/random.hpp"

namespace bushold {

enum class EventKind { Dispatch, ArriveStop, ServiceComplete, DepartStop, ArriveTerminal, Warning };

std::string to_string(EventKind kind);

enum class BusStatus { IdleAtTerminal, Driving, Dwelling, Holding };

struct Bus {
  int bus_id = 0;
  Direction direction = Direction::Up;
  BusStatus status = BusStatus::IdleAtTerminal;
  /// Stop index while at a stop or terminal; segment index while driving.
  int location = 0;
  /// Onboard passengers counted by destination stop.
  std::array<int, kNumStops> onboard{};
  int onboard_total = 0;
  int trip_count = 0;

  // Current-trip bookkeeping.
  double trip_start = 0.0;
  /// Last stop whose service completed (origin terminal right after dispatch).
  int last_completed_stop = 0;
  double last_completion_time = 0.0;
  double idle_since = 0.0;
  /// Standard-normal draws for each segment of the current trip, in travel order.
  std::array<double, kNumSegments> speed_noise{};

  bool active() const { return status != BusStatus::IdleAtTerminal; }
};

/// Completion record of one bus at one stop.
struct Completion {
  int bus_id = 0;
  double time = 0.0;
};

/// Completion order per (direction, stop).
class HeadwayLedger {
 public:
  /// Appends a completion; times per (direction, stop) must be non-decreasing.
  void record(Direction d, int stop, int bus_id, double time);
  std::span<const Completion> completions(Direction d, int stop) const;
  void clear();

 private:
  std::array<std::array<std::vector<Completion>, kNumStops>, 2> entries_;
};

/// y_time minus the previous completion at (d, stop), or `target_headway` when the
/// completion at `index` is the first of the day there.
double forward_headway(const HeadwayLedger& ledger, Direction d, int stop, std::size_t index,
                       double target_headway);

/// Convenience overload for the most recent completion at (d, stop).
double forward_headway(const HeadwayLedger& ledger, Direction d, int stop, double target_headway);

double compute_dwell(int board_count, int alight_count, double board_secs = 2.0, double alight_secs = 1.0);

struct EventRecord {
  double time = 0.0;
  int bus_id = -1;
  Direction direction = Direction::Up;
  int stop = -1;
  EventKind kind = EventKind::Dispatch;
  double h_f = std::numeric_limits<double>::quiet_NaN();
  double h_b = std::numeric_limits<double>::quiet_NaN();
  double hold = std::numeric_limits<double>::quiet_NaN();
  int board = 0;
  int alight = 0;
};

struct EpisodeTotals {
  long passengers_generated = 0;
  long passengers_delivered = 0;
  long passengers_waiting = 0;
  long passengers_onboard = 0;
  std::array<int, 2> trips{};
  int decisions = 0;
  int warnings = 0;
  int fleet_size = 0;
  double end_time = 0.0;
  double total_dwell = 0.0;
  double total_hold = 0.0;
};

struct EpisodeLog {
  std::vector<EventRecord> records;
  EpisodeTotals totals;

  /// FNV-1a 64 over the CSV rendering of every record.
  std::uint64_t trace_hash() const;
  void write_csv(std::ostream& out) const;
};

/// CSV row for one record, without newline.
std::string format_record(const EventRecord& r);
inline constexpr const char* kEpisodeLogHeader = "time_s,bus_id,direction,stop,kind,h_f,h_b,hold_s,board,alight";

class Simulation;

/// Service completion at an intermediate stop (a decision point).
struct DecisionPoint {
  int bus_id = 0;
  Direction direction = Direction::Up;
  int stop = 0;
  double time = 0.0;
  double forward_headway = 0.0;
  bool final_stop = false;
};

struct Decision {
  double hold_secs = 0.0;
  /// Backward-headway estimate shown to the controller, for the log only.
  double backward_headway = std::numeric_limits<double>::quiet_NaN();
};

/// Receives simulation callbacks. Implemented by the control adapter.
class DecisionHook {
 public:
  virtual ~DecisionHook() = default;
  /// Called at every service completion on an intermediate stop, after the
  /// ledger has recorded it. Returns the requested hold (clamped by the caller).
  virtual Decision on_decision(const DecisionPoint& point, Simulation& sim) = 0;
  /// Called when a bus reaches its destination terminal.
  virtual void on_trip_end(int /*bus_id*/, double /*trip_start*/, double /*time*/, Simulation& /*sim*/) {}
  virtual void on_episode_end(Simulation& /*sim*/) {}
};

/// Zero holding everywhere.
class NoHoldHook : public DecisionHook {
 public:
  Decision on_decision(const DecisionPoint&, Simulation&) override { return {}; }
};

/// One simulated day of the corridor as a single-threaded event loop. Events are
/// processed in (time, seq) order, seq assigned when an event is scheduled.
class Simulation {
 public:
  Simulation(const ScenarioConfig& scenario, std::uint64_t seed);

  EpisodeLog run(DecisionHook& hook);

  const ScenarioConfig& scenario() const { return scenario_; }
  const HeadwayLedger& ledger() const { return ledger_; }
  std::span<const Bus> fleet() const { return buses_; }
  const Bus& bus(int id) const { return buses_.at(id); }
  double now() const { return now_; }
  /// Timetable departures in `d` not yet dispatched.
  int dispatches_remaining(Direction d) const;
  /// True if some completion at (d, stop) can still happen after now.
  bool completion_pending(Direction d, int stop) const;

  /// Appends a warning record to the log.
  void warn(int bus_id, Direction d, int stop, double value);

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    int bus_id;
    Direction direction;
    int stop;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  struct Passenger {
    double arrival;
    int destination;
  };

  void schedule(double time, EventKind kind, int bus_id, Direction d, int stop);
  void generate_demand();
  void handle_dispatch(const Event& e);
  void handle_arrive_stop(const Event& e);
  void handle_service_complete(const Event& e, DecisionHook& hook);
  void handle_depart(const Event& e);
  void handle_arrive_terminal(const Event& e, DecisionHook& hook);
  void depart_towards_next(Bus& bus, int from_stop, double time);
  int acquire_bus(Direction d, double time);
  EventRecord& log(double time, const Bus& bus, int stop, EventKind kind);

  const ScenarioConfig& scenario_;
  std::uint64_t seed_;
  RngStream demand_rng_;
  RngStream traffic_rng_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;

  std::vector<Bus> buses_;
  /// Idle buses per terminal (indexed by stop 0 / 21 → slot 0 / 1) in return order.
  std::array<std::deque<int>, 2> idle_;
  std::array<int, 2> dispatched_{};
  /// Number of active buses per direction that have not completed each stop.
  std::array<std::array<int, kNumStops>, 2> pending_completions_{};
  /// Waiting passengers per (stop, direction), ascending arrival.
  std::array<std::array<std::deque<Passenger>, 2>, kNumStops> waiting_;
  HeadwayLedger ledger_;
  EpisodeLog log_;
};

/// Runs one episode with the given hook.
EpisodeLog run_episode(const ScenarioConfig& scenario, DecisionHook& hook, std::uint64_t rng_seed);

}  // namespace bushold
