#include "bushold/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "bushold/error.hpp"

namespace bushold {

StateVector terminal_sentinel(const StateVector& last) {
  StateVector s = last;
  s.stop_id = destination_terminal(direction_from_int(last.direction));
  s.h_f_norm = 1.0;
  s.h_b_norm = 1.0;
  s.seg_speed_norm = 0.0;
  s.terminal = true;
  return s;
}

double reward(double h_f, double h_b) {
  const double dev_f = std::abs(h_f - kRewardTargetHeadway);
  const double dev_b = std::abs(h_b - kRewardTargetHeadway);
  // eps only guards the apex, where both deviations vanish.
  const double w = dev_f / std::max(dev_f + dev_b, kRewardEpsilon);
  const double ridge = w * -dev_f + (1.0 - w) * -dev_b;
  const double asymmetry = kRewardAsymmetryWeight * std::abs(h_f - h_b);
  const bool outlier = dev_f > kRewardPenaltyBand || dev_b > kRewardPenaltyBand;
  return ridge - asymmetry - (outlier ? kRewardOutlierPenalty : 0.0);
}

double project_completion(const ScenarioConfig& sc, Direction d, int from_stop, double from_time, int to_stop,
                          int hour) {
  double t = from_time;
  for (int s = from_stop; s != to_stop; s = next_stop(d, s)) {
    const int seg = segment_after(d, s);
    t += sc.segment_length(seg) / sc.mean_speed(seg, hour);
  }
  return t;
}

double estimate_backward_headway(const Simulation& sim, int bus_id, Direction d, int stop, double now) {
  const auto& sc = sim.scenario();
  const int hour = hour_index(now);
  double best = std::numeric_limits<double>::infinity();
  for (const Bus& b : sim.fleet()) {
    if (b.bus_id == bus_id || !b.active() || b.direction != d) continue;
    const bool behind = d == Direction::Up ? b.last_completed_stop < stop : b.last_completed_stop > stop;
    if (!behind) continue;
    best = std::min(best, project_completion(sc, d, b.last_completed_stop, b.last_completion_time, stop, hour));
  }
  if (!std::isfinite(best)) return sc.target_headway_secs;
  return std::max(0.0, best - now);
}

StateVector assemble_state(const Simulation& sim, const DecisionPoint& point) {
  const auto& sc = sim.scenario();
  StateVector s;
  s.bus_id = point.bus_id;
  s.stop_id = point.stop;
  s.time_period = hour_index(point.time);
  s.direction = to_int(point.direction);
  s.h_f_norm = point.forward_headway / sc.target_headway_secs;
  s.h_b_norm = estimate_backward_headway(sim, point.bus_id, point.direction, point.stop, point.time) /
               sc.target_headway_secs;
  const int seg = segment_after(point.direction, point.stop);
  s.seg_speed_norm = sc.mean_speed(seg, s.time_period) / kSpeedNormalizer;
  return s;
}

double RuleHolder::observe(const StateVector& state) {
  const double h_f = state.h_f_norm * target_;
  return std::min(max_hold_, std::max(0.0, target_ - h_f));
}

// ---- TransitionAssembler -------------------------------------------------

void TransitionAssembler::resolve(Open&& open, double h_b) {
  open.t.realized_h_b = h_b;
  open.t.reward = reward(open.t.realized_h_f, h_b);
  completed_.push_back(open.t);
}

void TransitionAssembler::on_completion(const CompletionEvent& ev, const StateVector& state, double action) {
  const auto key = std::make_pair(to_int(ev.direction), ev.stop);

  double h_f = target_;
  if (auto it = last_completion_.find(key); it != last_completion_.end()) h_f = ev.time - it->second.time;
  last_completion_[key] = Completion{ev.bus_id, ev.time};

  // This completion is the follower of everything waiting at (direction, stop).
  if (auto it = awaiting_follower_.find(key); it != awaiting_follower_.end()) {
    auto waiting = std::move(it->second);
    awaiting_follower_.erase(it);
    for (auto& open : waiting) {
      const double h_b = ev.time - open.own_time;
      resolve(std::move(open), h_b);
    }
  }

  auto park = [&](Open&& open) {
    open.own_time = ev.time;
    open.t.reward_stop = ev.stop;
    open.t.realized_h_f = h_f;
    if (ev.follower_possible) {
      awaiting_follower_[key].push_back(std::move(open));
    } else {
      resolve(std::move(open), target_);
    }
  };

  // The bus's previous decision learns its next state here.
  if (auto it = awaiting_next_.find(ev.bus_id); it != awaiting_next_.end()) {
    Open open = std::move(it->second);
    awaiting_next_.erase(it);
    open.t.next_state = state;
    open.t.done = false;
    park(std::move(open));
  }

  ++decisions_;
  Open fresh;
  fresh.direction = ev.direction;
  fresh.t.state = state;
  fresh.t.action = action;
  fresh.t.bus_id = ev.bus_id;
  fresh.t.decision_stop = ev.stop;
  fresh.t.decision_time = ev.time;
  if (ev.final_stop) {
    fresh.t.next_state = terminal_sentinel(state);
    fresh.t.done = true;
    park(std::move(fresh));
  } else {
    if (awaiting_next_.count(ev.bus_id)) throw ArgumentError("TransitionAssembler: bus already has an open decision");
    awaiting_next_.emplace(ev.bus_id, std::move(fresh));
  }
}

std::vector<Transition> TransitionAssembler::expire_stale(double now, double trip_duration) {
  std::vector<Transition> expired;
  for (auto it = awaiting_follower_.begin(); it != awaiting_follower_.end();) {
    auto& list = it->second;
    std::vector<Open> keep;
    for (auto& open : list) {
      if (now - open.own_time > trip_duration) {
        resolve(std::move(open), target_);
        expired.push_back(completed_.back());
      } else {
        keep.push_back(std::move(open));
      }
    }
    if (keep.empty()) {
      it = awaiting_follower_.erase(it);
    } else {
      list = std::move(keep);
      ++it;
    }
  }
  return expired;
}

int TransitionAssembler::flush() {
  for (auto& [key, list] : awaiting_follower_)
    for (auto& open : list) resolve(std::move(open), target_);
  awaiting_follower_.clear();
  const int orphaned = static_cast<int>(awaiting_next_.size());
  for (auto& [bus, open] : awaiting_next_) {
    open.t.next_state = terminal_sentinel(open.t.state);
    open.t.done = true;
    open.t.reward_stop = open.t.decision_stop;
    open.t.realized_h_f = target_;
    resolve(std::move(open), target_);
  }
  awaiting_next_.clear();
  return orphaned;
}

std::vector<Transition> TransitionAssembler::take_completed() {
  std::vector<Transition> out;
  out.swap(completed_);
  return out;
}

std::size_t TransitionAssembler::open_count() const {
  std::size_t n = awaiting_next_.size();
  for (const auto& [key, list] : awaiting_follower_) n += list.size();
  return n;
}

// ---- ReplayBuffer ----------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ArgumentError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::append(Transition t) {
  std::lock_guard lock(mu_);
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

void ReplayBuffer::append(const std::vector<Transition>& ts) {
  for (const auto& t : ts) append(t);
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mu_);
  return data_.size();
}

Transition ReplayBuffer::at(std::size_t index) const {
  std::lock_guard lock(mu_);
  return data_.at(index);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& rng) {
  if (k > n) throw ArgumentError("sample_without_replacement: k > n");
  std::vector<std::size_t> out;
  out.reserve(k);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(k * 2);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    const std::size_t pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

std::optional<std::vector<std::size_t>> ReplayBuffer::sample_indices(std::size_t batch_size, RngStream& rng) const {
  std::lock_guard lock(mu_);
  if (batch_size == 0 || data_.size() < batch_size) return std::nullopt;
  return sample_without_replacement(data_.size(), batch_size, rng);
}

std::optional<std::vector<Transition>> ReplayBuffer::sample(std::size_t batch_size, RngStream& rng) const {
  std::lock_guard lock(mu_);
  if (batch_size == 0 || data_.size() < batch_size) return std::nullopt;
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (std::size_t i : sample_without_replacement(data_.size(), batch_size, rng)) out.push_back(data_[i]);
  return out;
}

// ---- ControlEnv ------------------------------------------------------------

ControlEnv::ControlEnv(const ScenarioConfig& scenario, HoldingController& controller)
    : scenario_(scenario), controller_(controller), assembler_(scenario.target_headway_secs) {}

Decision ControlEnv::on_decision(const DecisionPoint& point, Simulation& sim) {
  const StateVector state = assemble_state(sim, point);
  const double requested = controller_.observe(state);
  const double action = std::isnan(requested) ? 0.0 : std::clamp(requested, 0.0, scenario_.max_hold_secs);

  CompletionEvent ev;
  ev.bus_id = point.bus_id;
  ev.direction = point.direction;
  ev.stop = point.stop;
  ev.time = point.time;
  ev.follower_possible = sim.completion_pending(point.direction, point.stop);
  ev.final_stop = point.final_stop;
  assembler_.on_completion(ev, state, action);

  Decision d;
  d.hold_secs = requested;
  d.backward_headway = state.h_b_norm * scenario_.target_headway_secs;
  return d;
}

void ControlEnv::on_trip_end(int bus_id, double trip_start, double time, Simulation& sim) {
  (void)bus_id;
  for (const auto& t : assembler_.expire_stale(time, time - trip_start)) {
    sim.warn(t.bus_id, direction_from_int(t.state.direction), t.reward_stop, scenario_.target_headway_secs);
  }
}

void ControlEnv::on_episode_end(Simulation& sim) {
  const int orphaned = assembler_.flush();
  for (int i = 0; i < orphaned; ++i) sim.warn(-1, Direction::Up, -1, scenario_.target_headway_secs);
}

EpisodeResult run_controlled_episode(const ScenarioConfig& scenario, HoldingController& controller,
                                     std::uint64_t rng_seed) {
  ControlEnv env(scenario, controller);
  EpisodeResult result;
  result.log = run_episode(scenario, env, rng_seed);
  result.transitions = env.take_transitions();
  for (const auto& t : result.transitions) result.cumulative_reward += t.reward;
  return result;
}

}  // namespace bushold
