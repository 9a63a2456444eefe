#include "bushold/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "bushold/error.hpp"

namespace bushold {

namespace {

int terminal_slot(int stop) { return stop == kTerminalUp ? 0 : 1; }

// Position of segment `segment` in the traversal order of direction d.
int traversal_index(Direction d, int segment) { return d == Direction::Up ? segment : kNumSegments - 1 - segment; }

std::string format_optional(double v) { return std::isnan(v) ? std::string{} : format_double(v); }

}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Dispatch: return "dispatch";
    case EventKind::ArriveStop: return "arrive_stop";
    case EventKind::ServiceComplete: return "service_complete";
    case EventKind::DepartStop: return "depart_stop";
    case EventKind::ArriveTerminal: return "arrive_terminal";
    case EventKind::Warning: return "warning";
  }
  return "warning";
}

void HeadwayLedger::record(Direction d, int stop, int bus_id, double time) {
  auto& list = entries_[to_int(d)][stop];
  if (!list.empty() && time < list.back().time) {
    throw ScenarioError("headway ledger: completion times must not decrease");
  }
  list.push_back({bus_id, time});
}

std::span<const Completion> HeadwayLedger::completions(Direction d, int stop) const {
  return entries_[to_int(d)].at(stop);
}

void HeadwayLedger::clear() {
  for (auto& per_dir : entries_)
    for (auto& list : per_dir) list.clear();
}

double forward_headway(const HeadwayLedger& ledger, Direction d, int stop, std::size_t index,
                       double target_headway) {
  const auto list = ledger.completions(d, stop);
  if (index >= list.size()) throw ArgumentError("forward_headway: completion index out of range");
  if (index == 0) return target_headway;
  return list[index].time - list[index - 1].time;
}

double forward_headway(const HeadwayLedger& ledger, Direction d, int stop, double target_headway) {
  const auto list = ledger.completions(d, stop);
  if (list.empty()) throw ArgumentError("forward_headway: no completion recorded");
  return forward_headway(ledger, d, stop, list.size() - 1, target_headway);
}

double compute_dwell(int board_count, int alight_count, double board_secs, double alight_secs) {
  if (board_count < 0 || alight_count < 0) throw ArgumentError("compute_dwell: negative count");
  return std::max(board_secs * board_count, alight_secs * alight_count);
}

std::string format_record(const EventRecord& r) {
  std::string s;
  s.reserve(96);
  s += format_double(r.time);
  s += ',';
  s += std::to_string(r.bus_id);
  s += ',';
  s += std::to_string(to_int(r.direction));
  s += ',';
  s += std::to_string(r.stop);
  s += ',';
  s += to_string(r.kind);
  s += ',';
  s += format_optional(r.h_f);
  s += ',';
  s += format_optional(r.h_b);
  s += ',';
  s += format_optional(r.hold);
  s += ',';
  s += std::to_string(r.board);
  s += ',';
  s += std::to_string(r.alight);
  return s;
}

std::uint64_t EpisodeLog::trace_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  };
  for (const auto& r : records) {
    for (char c : format_record(r)) mix(c);
    mix('\n');
  }
  return h;
}

void EpisodeLog::write_csv(std::ostream& out) const {
  out << kEpisodeLogHeader << '\n';
  for (const auto& r : records) out << format_record(r) << '\n';
}

Simulation::Simulation(const ScenarioConfig& scenario, std::uint64_t seed)
    : scenario_(scenario),
      seed_(seed),
      demand_rng_(seed, StreamId::Demand),
      traffic_rng_(seed, StreamId::Traffic) {}

void Simulation::schedule(double time, EventKind kind, int bus_id, Direction d, int stop) {
  queue_.push(Event{time, next_seq_++, kind, bus_id, d, stop});
}

int Simulation::dispatches_remaining(Direction d) const {
  return static_cast<int>(scenario_.timetable(d).departures.size()) - dispatched_[to_int(d)];
}

bool Simulation::completion_pending(Direction d, int stop) const {
  return pending_completions_[to_int(d)][stop] > 0 || dispatches_remaining(d) > 0;
}

EventRecord& Simulation::log(double time, const Bus& bus, int stop, EventKind kind) {
  EventRecord r;
  r.time = time;
  r.bus_id = bus.bus_id;
  r.direction = bus.direction;
  r.stop = stop;
  r.kind = kind;
  log_.records.push_back(r);
  return log_.records.back();
}

void Simulation::warn(int bus_id, Direction d, int stop, double value) {
  EventRecord r;
  r.time = now_;
  r.bus_id = bus_id;
  r.direction = d;
  r.stop = stop;
  r.kind = EventKind::Warning;
  r.hold = value;
  log_.records.push_back(r);
  ++log_.totals.warnings;
}

void Simulation::generate_demand() {
  for (int h = 0; h < kNumHours; ++h) {
    const double t0 = h * kSecondsPerHour;
    const double t1 = t0 + kSecondsPerHour;
    for (int o = 0; o < kNumStops; ++o) {
      for (int dst = 0; dst < kNumStops; ++dst) {
        const double mu = scenario_.od_rate(h, o, dst);
        if (mu == 0.0) continue;
        const int dir = dst > o ? to_int(Direction::Up) : to_int(Direction::Down);
        for (double t : sample_arrivals(mu, t0, t1, demand_rng_)) waiting_[o][dir].push_back({t, dst});
      }
    }
  }
  long generated = 0;
  for (auto& per_stop : waiting_) {
    for (auto& q : per_stop) {
      std::stable_sort(q.begin(), q.end(),
                       [](const Passenger& a, const Passenger& b) { return a.arrival < b.arrival; });
      generated += static_cast<long>(q.size());
    }
  }
  log_.totals.passengers_generated = generated;
}

int Simulation::acquire_bus(Direction d, double time) {
  auto& idle = idle_[terminal_slot(origin_terminal(d))];
  if (!idle.empty()) {
    const int id = idle.front();
    idle.pop_front();
    return id;
  }
  const int id = static_cast<int>(buses_.size());
  if (id >= scenario_.max_fleet) {
    throw ScenarioError("dispatch at t=" + format_double(time) + " needs bus " + std::to_string(id) +
                        " but max_fleet is " + std::to_string(scenario_.max_fleet));
  }
  Bus b;
  b.bus_id = id;
  buses_.push_back(b);
  return id;
}

void Simulation::handle_dispatch(const Event& e) {
  const int id = acquire_bus(e.direction, e.time);
  Bus& bus = buses_[id];
  bus.direction = e.direction;
  bus.status = BusStatus::Driving;
  bus.trip_start = e.time;
  bus.onboard.fill(0);
  bus.onboard_total = 0;
  const int origin = origin_terminal(e.direction);
  bus.last_completed_stop = origin;
  bus.last_completion_time = e.time;
  for (auto& z : bus.speed_noise) z = traffic_rng_.normal();
  ++dispatched_[to_int(e.direction)];
  for (int s = 1; s < kTerminalDown; ++s) ++pending_completions_[to_int(e.direction)][s];
  log(e.time, bus, origin, EventKind::Dispatch);
  depart_towards_next(bus, origin, e.time);
}

void Simulation::depart_towards_next(Bus& bus, int from_stop, double time) {
  const int seg = segment_after(bus.direction, from_stop);
  const int to = next_stop(bus.direction, from_stop);
  const double mean = scenario_.mean_speed(seg, hour_index(time));
  const double z = bus.speed_noise[traversal_index(bus.direction, seg)];
  const double speed =
      scenario_.speed_sigma == 0.0 ? mean : segment_speed_from_normal(mean, scenario_.speed_sigma, z);
  const double travel = scenario_.segment_length(seg) / speed;
  bus.status = BusStatus::Driving;
  bus.location = seg;
  const EventKind kind = is_intermediate(to) ? EventKind::ArriveStop : EventKind::ArriveTerminal;
  schedule(time + travel, kind, bus.bus_id, bus.direction, to);
}

void Simulation::handle_arrive_stop(const Event& e) {
  Bus& bus = buses_[e.bus_id];
  bus.status = BusStatus::Dwelling;
  bus.location = e.stop;

  const int alight = bus.onboard[e.stop];
  bus.onboard[e.stop] = 0;
  bus.onboard_total -= alight;
  log_.totals.passengers_delivered += alight;

  auto& queue = waiting_[e.stop][to_int(bus.direction)];
  int board = 0;
  while (!queue.empty() && queue.front().arrival <= e.time && bus.onboard_total < scenario_.bus_capacity) {
    ++bus.onboard[queue.front().destination];
    ++bus.onboard_total;
    queue.pop_front();
    ++board;
  }

  const double dwell = compute_dwell(board, alight, scenario_.dwell_board_secs, scenario_.dwell_alight_secs);
  log_.totals.total_dwell += dwell;
  auto& rec = log(e.time, bus, e.stop, EventKind::ArriveStop);
  rec.board = board;
  rec.alight = alight;
  schedule(e.time + dwell, EventKind::ServiceComplete, bus.bus_id, bus.direction, e.stop);
}

void Simulation::handle_service_complete(const Event& e, DecisionHook& hook) {
  Bus& bus = buses_[e.bus_id];
  ledger_.record(bus.direction, e.stop, bus.bus_id, e.time);
  --pending_completions_[to_int(bus.direction)][e.stop];
  bus.last_completed_stop = e.stop;
  bus.last_completion_time = e.time;
  bus.status = BusStatus::Holding;

  DecisionPoint point;
  point.bus_id = bus.bus_id;
  point.direction = bus.direction;
  point.stop = e.stop;
  point.time = e.time;
  point.forward_headway = forward_headway(ledger_, bus.direction, e.stop, scenario_.target_headway_secs);
  point.final_stop = e.stop == final_intermediate_stop(bus.direction);

  const Decision decision = hook.on_decision(point, *this);
  double hold = decision.hold_secs;
  const bool out_of_range = !(hold >= 0.0 && hold <= scenario_.max_hold_secs);
  if (out_of_range) hold = std::isnan(hold) ? 0.0 : std::clamp(hold, 0.0, scenario_.max_hold_secs);
  ++log_.totals.decisions;
  log_.totals.total_hold += hold;

  auto& rec = log(e.time, bus, e.stop, EventKind::ServiceComplete);
  rec.h_f = point.forward_headway;
  rec.h_b = decision.backward_headway;
  rec.hold = hold;
  if (out_of_range) warn(bus.bus_id, bus.direction, e.stop, decision.hold_secs);
  schedule(e.time + hold, EventKind::DepartStop, bus.bus_id, bus.direction, e.stop);
}

void Simulation::handle_depart(const Event& e) {
  Bus& bus = buses_[e.bus_id];
  log(e.time, bus, e.stop, EventKind::DepartStop);
  depart_towards_next(bus, e.stop, e.time);
}

void Simulation::handle_arrive_terminal(const Event& e, DecisionHook& hook) {
  Bus& bus = buses_[e.bus_id];
  bus.status = BusStatus::IdleAtTerminal;
  bus.location = e.stop;
  bus.idle_since = e.time;
  ++bus.trip_count;
  ++log_.totals.trips[to_int(bus.direction)];
  idle_[terminal_slot(e.stop)].push_back(bus.bus_id);
  log(e.time, bus, e.stop, EventKind::ArriveTerminal);
  hook.on_trip_end(bus.bus_id, bus.trip_start, e.time, *this);
}

EpisodeLog Simulation::run(DecisionHook& hook) {
  scenario_.validate();
  generate_demand();
  for (Direction d : {Direction::Up, Direction::Down}) {
    for (int dep : scenario_.timetable(d).departures) schedule(dep, EventKind::Dispatch, -1, d, origin_terminal(d));
  }

  while (!queue_.empty()) {
    const Event e = queue_.top();
    queue_.pop();
    now_ = e.time;
    switch (e.kind) {
      case EventKind::Dispatch: handle_dispatch(e); break;
      case EventKind::ArriveStop: handle_arrive_stop(e); break;
      case EventKind::ServiceComplete: handle_service_complete(e, hook); break;
      case EventKind::DepartStop: handle_depart(e); break;
      case EventKind::ArriveTerminal: handle_arrive_terminal(e, hook); break;
      case EventKind::Warning: break;
    }
  }

  hook.on_episode_end(*this);

  auto& t = log_.totals;
  t.end_time = now_;
  t.fleet_size = static_cast<int>(buses_.size());
  t.passengers_waiting = 0;
  for (const auto& per_stop : waiting_)
    for (const auto& q : per_stop) t.passengers_waiting += static_cast<long>(q.size());
  t.passengers_onboard = 0;
  for (const auto& b : buses_) t.passengers_onboard += b.onboard_total;
  return std::move(log_);
}

EpisodeLog run_episode(const ScenarioConfig& scenario, DecisionHook& hook, std::uint64_t rng_seed) {
  Simulation sim(scenario, rng_seed);
  return sim.run(hook);
}

}  // namespace bushold
