#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bushold/control.hpp"
#include "bushold/nn.hpp"

namespace bushold {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double lr = 1e-5;
  int batch_size = 2048;
  double target_entropy = -1.0;
  long warmup_tuples = 5000;
  /// Gradient steps after each episode; 0 means one per decision in that episode.
  long updates_per_episode = 0;
  double alpha_init = 0.2;
  std::size_t buffer_capacity = 1'000'000;
  std::vector<int> hidden{32, 32, 32};
  /// Multiplier applied to rewards inside the critic target. 1 keeps raw rewards.
  double reward_scale = 1.0;

  /// Throws ArgumentError on an out-of-range field.
  void validate() const;
  bool operator==(const SacConfig&) const = default;
};

/// Column-aligned minibatch of transitions.
struct Batch {
  std::vector<StateVector> states;
  nn::RowVector actions;
  nn::RowVector rewards;
  std::vector<StateVector> next_states;
  nn::RowVector done;

  std::size_t size() const { return states.size(); }
  static Batch from(std::span<const Transition> ts);
};

/// Value and action-gradient of an action-value function over a batch.
struct ActionValues {
  nn::RowVector q;
  nn::RowVector dq_da;
};
using ActionValueFn = std::function<ActionValues(std::span<const StateVector>, const nn::RowVector&)>;

/// Mean squared error between Q(s, a) and fixed targets `y`. When
/// `accumulate` is set, adds parameter gradients to the critic.
double critic_loss(nn::CriticNet& critic, const Batch& batch, const nn::RowVector& y, bool accumulate);

/// mean[alpha * log pi(a|s) - Q(s, a)] with a = squash(mean + std * noise).
/// `log_probs`, when given, receives the per-sample log densities.
double actor_loss(nn::PolicyNet& policy, std::span<const StateVector> states, const nn::RowVector& noise, double alpha,
                  const ActionValueFn& q, bool accumulate, nn::RowVector* log_probs = nullptr);

/// mean[-log_alpha * (log_prob + target_entropy)]; `grad` receives d/d log_alpha.
double temperature_loss(double log_alpha, const nn::RowVector& log_probs, double target_entropy,
                        double* grad = nullptr);

struct UpdateStats {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  bool finite = true;
};

/// Policy, twin critics, their targets, temperature and optimizer state.
class SacAgent {
 public:
  SacAgent() = default;
  SacAgent(const SacConfig& config, double max_hold, std::uint64_t seed, const nn::Vocab& vocab = {});

  double alpha() const;
  double max_hold() const { return policy.max_hold; }

  /// Stochastic action in seconds.
  double sample_action(const StateVector& state, RngStream& rng) const;
  double deterministic_action(const StateVector& state) const { return policy.deterministic_action(state); }

  /// min of both critics and its action gradient; parameters untouched.
  ActionValues min_q(std::span<const StateVector> states, const nn::RowVector& actions) const;

  /// y = scale*r + gamma*(1-done)*[min target Q(s', a') - alpha*log pi(a'|s')],
  /// a' = squash(mean + std * noise) from the current policy at s'.
  nn::RowVector critic_target(const Batch& batch, const nn::RowVector& noise) const;

  /// One Adam step per critic toward fixed targets. Returns {loss1, loss2};
  /// no step is taken when either loss is non-finite.
  std::pair<double, double> critic_update(const Batch& batch, const nn::RowVector& y);
  /// One Adam step on the policy; returns the loss and the log densities used.
  double actor_update(const Batch& batch, const nn::RowVector& noise, nn::RowVector* log_probs = nullptr);
  /// One Adam step on log_alpha; returns the new alpha.
  double temperature_update(const nn::RowVector& log_probs);
  void update_targets();

  /// Full SAC step: critics, actor, temperature, then Polyak averaging.
  UpdateStats update(const Batch& batch, RngStream& rng);

  SacConfig config;
  nn::Vocab vocab;
  nn::PolicyNet policy;
  nn::CriticNet q1, q2, q1_target, q2_target;
  nn::Param log_alpha;
  nn::AdamState policy_opt, q1_opt, q2_opt, alpha_opt;
  long global_step = 0;
  long episode = 0;
};

/// Holding controller backed by a policy. Samples when `rng` is set, else uses the mean.
class SacController : public HoldingController {
 public:
  SacController(const SacAgent& agent, RngStream* rng) : agent_(agent), rng_(rng) {}
  double observe(const StateVector& state) override;

 private:
  const SacAgent& agent_;
  RngStream* rng_;
};

struct EpisodeMetrics {
  long episode = 0;
  double cum_reward = 0.0;
  double alpha = 0.0;
  /// NaN when no update ran in the episode.
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  std::size_t buffer_size = 0;
};

inline constexpr const char* kMetricsHeader = "episode,cum_reward,alpha,actor_loss,critic_loss,buffer_size";
void write_metrics_csv(std::ostream& out, std::span<const EpisodeMetrics> metrics);

struct TrainResult {
  /// Final agent, or the last good one after a divergence.
  SacAgent agent;
  std::vector<EpisodeMetrics> metrics;
  bool diverged = false;
  std::string diagnostic;
};

using EpisodeCallback = std::function<void(const EpisodeMetrics&)>;

/// Alternates one stochastic rollout with a block of updates (once the buffer
/// holds warmup_tuples). Episode k runs with episode_seed(seed, k).
TrainResult train(const ScenarioConfig& scenario, const SacConfig& config, int episodes, std::uint64_t seed,
                  const EpisodeCallback& on_episode = {});

/// Continues training an existing agent for `episodes` more episodes.
TrainResult train(const ScenarioConfig& scenario, SacAgent agent, int episodes, std::uint64_t seed,
                  const EpisodeCallback& on_episode = {});

/// Seed of episode k in a run seeded with `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t k);

struct EvaluationResult {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single rollout
};

/// K deterministic-policy rollouts with episode seeds episode_seed(base_seed, k).
EvaluationResult evaluate(const ScenarioConfig& scenario, const SacAgent& agent, int rollouts,
                          std::uint64_t base_seed);

// Checkpoints (JSON, see docs/formats.md).
void save_checkpoint(const SacAgent& agent, const std::string& path);
SacAgent load_checkpoint(const std::string& path);

}  // namespace bushold
