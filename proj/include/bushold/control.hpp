#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "bushold/corridor.hpp"
#include "bushold/random.hpp"
#include "bushold/simulator.hpp"

namespace bushold {

inline constexpr double kSpeedNormalizer = 15.0;
inline constexpr double kRewardEpsilon = 1e-6;
inline constexpr double kRewardTargetHeadway = 360.0;
inline constexpr double kRewardPenaltyBand = 180.0;
inline constexpr double kRewardOutlierPenalty = 20.0;
inline constexpr double kRewardAsymmetryWeight = 0.5;

/// Observation at a decision point: four categorical ids and three scaled features.
struct StateVector {
  int bus_id = 0;
  /// 1..20 at decision points; the destination terminal in the end-of-trip sentinel.
  int stop_id = 1;
  int time_period = 0;
  int direction = 1;
  double h_f_norm = 1.0;
  double h_b_norm = 1.0;
  double seg_speed_norm = 0.0;
  /// Set only on the end-of-trip sentinel next-state.
  bool terminal = false;

  bool operator==(const StateVector&) const = default;
};

/// End-of-trip next-state for a decision taken at the final intermediate stop.
StateVector terminal_sentinel(const StateVector& last);

/// Ridge-shaped headway reward, maximal (0) at h_f = h_b = 360.
///
///   R = w*phi(h_f) + (1-w)*phi(h_b) - 0.5*|h_f - h_b| - 20*[|h_f-360| > 180 or |h_b-360| > 180]
///   phi(h) = -|h - 360|,  w = |h_f-360| / max(|h_f-360| + |h_b-360|, eps)
double reward(double h_f, double h_b);

/// Time at which a bus that completed `from_stop` at `from_time` would complete
/// `to_stop` (further along direction `d`), driving at the hourly mean speeds of
/// `hour` with no dwell.
double project_completion(const ScenarioConfig& scenario, Direction d, int from_stop, double from_time, int to_stop,
                          int hour);

/// Projected time until the nearest follower (same direction, still behind
/// `stop`) completes service there, from its last completion point at hourly
/// mean speeds with no dwell. Clamped at 0; `target_headway_secs` when no
/// follower is active.
double estimate_backward_headway(const Simulation& sim, int bus_id, Direction d, int stop, double now);

/// State at a decision point.
StateVector assemble_state(const Simulation& sim, const DecisionPoint& point);

/// Maps an observation to a hold in seconds.
class HoldingController {
 public:
  virtual ~HoldingController() = default;
  virtual double observe(const StateVector& state) = 0;
};

/// Never holds.
class NoControl : public HoldingController {
 public:
  double observe(const StateVector&) override { return 0.0; }
};

/// Always holds a fixed amount.
class ConstantHold : public HoldingController {
 public:
  explicit ConstantHold(double secs) : secs_(secs) {}
  double observe(const StateVector&) override { return secs_; }

 private:
  double secs_;
};

/// Schedule-based holder: min(T, max(0, H* - h_f)).
class RuleHolder : public HoldingController {
 public:
  RuleHolder(double max_hold_secs, double target_headway_secs)
      : max_hold_(max_hold_secs), target_(target_headway_secs) {}
  double observe(const StateVector& state) override;

 private:
  double max_hold_;
  double target_;
};

struct Transition {
  StateVector state;
  double action = 0.0;  // seconds
  double reward = 0.0;
  StateVector next_state;
  bool done = false;

  // Bookkeeping for audits.
  int bus_id = 0;
  int decision_stop = 0;
  double decision_time = 0.0;
  int reward_stop = 0;
  double realized_h_f = 0.0;
  double realized_h_b = 0.0;
};

/// One service completion as seen by the transition assembler.
struct CompletionEvent {
  int bus_id = 0;
  Direction direction = Direction::Up;
  int stop = 0;
  double time = 0.0;
  /// Whether any later completion at (direction, stop) can still happen.
  bool follower_possible = true;
  bool final_stop = false;
};

/// Builds (s, a, r, s', done) tuples from asynchronous completions.
///
/// A decision at stop j is finished at the bus's next completion (stop j+1):
/// that supplies s' and the realized forward headway there. The realized
/// backward headway at j+1 arrives with the next completion at j+1 by any bus.
/// A decision at the final intermediate stop is done immediately with the
/// sentinel next-state; its reward uses the headways at that same stop.
class TransitionAssembler {
 public:
  explicit TransitionAssembler(double target_headway_secs = 360.0) : target_(target_headway_secs) {}

  /// Feed completions in simulation order. Every completion is a decision.
  void on_completion(const CompletionEvent& event, const StateVector& state, double action);

  /// Resolves with h_b = H* every entry that has waited for a follower longer
  /// than `trip_duration`. Returns the expired transitions.
  std::vector<Transition> expire_stale(double now, double trip_duration);

  /// End of episode: resolves everything still open with h_b = H*. Returns the
  /// number of entries that were still waiting for their own next completion.
  int flush();

  std::vector<Transition> take_completed();
  const std::vector<Transition>& completed() const { return completed_; }
  std::size_t open_count() const;
  long decisions() const { return decisions_; }

 private:
  struct Open {
    Transition t;
    Direction direction = Direction::Up;
    double own_time = 0.0;
  };
  void resolve(Open&& open, double h_b);

  double target_;
  long decisions_ = 0;
  std::map<std::pair<int, int>, Completion> last_completion_;  // (direction, stop)
  std::map<int, Open> awaiting_next_;                          // by bus
  std::map<std::pair<int, int>, std::vector<Open>> awaiting_follower_;
  std::vector<Transition> completed_;
};

/// Fixed-capacity ring of transitions; oldest entry overwritten when full.
/// Append and sample are serialized by one mutex.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000);

  void append(Transition t);
  void append(const std::vector<Transition>& ts);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  Transition at(std::size_t index) const;

  /// Batch of distinct indices, uniform without replacement; std::nullopt
  /// (not ready) when size() < batch_size.
  std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size, RngStream& rng) const;
  std::optional<std::vector<Transition>> sample(std::size_t batch_size, RngStream& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;
  mutable std::mutex mu_;
};

/// Distinct uniform indices in [0, n) (Floyd's algorithm), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, RngStream& rng);

/// Connects a HoldingController to the simulator and assembles transitions.
class ControlEnv : public DecisionHook {
 public:
  ControlEnv(const ScenarioConfig& scenario, HoldingController& controller);

  Decision on_decision(const DecisionPoint& point, Simulation& sim) override;
  void on_trip_end(int bus_id, double trip_start, double time, Simulation& sim) override;
  void on_episode_end(Simulation& sim) override;

  std::vector<Transition> take_transitions() { return assembler_.take_completed(); }
  const TransitionAssembler& assembler() const { return assembler_; }

 private:
  const ScenarioConfig& scenario_;
  HoldingController& controller_;
  TransitionAssembler assembler_;
};

struct EpisodeResult {
  EpisodeLog log;
  std::vector<Transition> transitions;
  double cumulative_reward = 0.0;
};

EpisodeResult run_controlled_episode(const ScenarioConfig& scenario, HoldingController& controller,
                                     std::uint64_t rng_seed);

}  // namespace bushold
