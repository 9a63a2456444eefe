#include "bushold/sac.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "bushold/error.hpp"

namespace bushold {

using nn::Matrix;
using nn::RowVector;

void SacConfig::validate() const {
  auto fail = [](const std::string& what) { throw ArgumentError("invalid SAC configuration: " + what); };
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must be in (0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!std::isfinite(target_entropy)) fail("target_entropy must be finite");
  if (warmup_tuples < 0) fail("warmup_tuples must be non-negative");
  if (updates_per_episode < 0) fail("updates_per_episode must be non-negative");
  if (!(alpha_init > 0.0) || !std::isfinite(alpha_init)) fail("alpha_init must be positive");
  if (buffer_capacity < static_cast<std::size_t>(batch_size)) fail("buffer_capacity must hold one batch");
  if (hidden.empty()) fail("at least one hidden layer is required");
  for (int h : hidden)
    if (h < 1) fail("hidden layer widths must be positive");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) fail("reward_scale must be positive");
}

Batch Batch::from(std::span<const Transition> ts) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(ts.size());
  b.states.reserve(ts.size());
  b.next_states.reserve(ts.size());
  b.actions.resize(n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = ts[static_cast<std::size_t>(i)];
    b.states.push_back(t.state);
    b.next_states.push_back(t.next_state);
    b.actions(i) = t.action;
    b.rewards(i) = t.reward;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  return b;
}

// ---- Losses --------------------------------------------------------------------------

double critic_loss(nn::CriticNet& critic, const Batch& batch, const RowVector& y, bool accumulate) {
  nn::CriticNet::Tape tape;
  const RowVector q = critic.forward(batch.states, batch.actions, accumulate ? &tape : nullptr);
  const RowVector diff = q - y;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  if (accumulate && !std::isfinite(loss)) throw GradientError("critic loss is not finite");
  if (accumulate) critic.backward(batch.states, tape, (2.0 / n) * diff, true);
  return loss;
}

double actor_loss(nn::PolicyNet& policy, std::span<const StateVector> states, const RowVector& noise, double alpha,
                  const ActionValueFn& q, bool accumulate, RowVector* log_probs) {
  nn::PolicyNet::Tape tape;
  const auto head = policy.forward(states, accumulate ? &tape : nullptr);
  const Eigen::Index n = head.mean.size();
  const double half_range = 0.5 * policy.max_hold;

  RowVector actions(n), logp(n), dlogp_dmean(n), dlogp_dls(n), da_du(n), du_dls(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto s = nn::squashed_sample(head.mean(b), head.log_std(b), noise(b), policy.max_hold);
    actions(b) = s.action;
    logp(b) = s.log_prob;
    dlogp_dmean(b) = s.dlogp_dmean;
    dlogp_dls(b) = s.dlogp_dlogstd;
    da_du(b) = half_range * s.dsquashed_du;
    du_dls(b) = std::exp(head.log_std(b)) * noise(b);
  }
  const ActionValues av = q(states, actions);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double loss = (alpha * logp - av.q).sum() * inv_n;
  if (log_probs != nullptr) *log_probs = logp;
  if (accumulate && !std::isfinite(loss)) throw GradientError("actor loss is not finite");

  if (accumulate) {
    const RowVector dq_du = av.dq_da.cwiseProduct(da_du);
    const RowVector d_mean = inv_n * (alpha * dlogp_dmean - dq_du);
    const RowVector d_log_std = inv_n * (alpha * dlogp_dls - dq_du.cwiseProduct(du_dls));
    policy.backward(states, tape, head, d_mean, d_log_std);
  }
  return loss;
}

double temperature_loss(double log_alpha, const RowVector& log_probs, double target_entropy, double* grad) {
  const double m = (log_probs.array() + target_entropy).mean();
  if (grad != nullptr) *grad = -m;
  return -log_alpha * m;
}

// ---- SacAgent ------------------------------------------------------------------------

SacAgent::SacAgent(const SacConfig& cfg, double max_hold, std::uint64_t seed, const nn::Vocab& v)
    : config(cfg), vocab(v) {
  config.validate();
  if (!(max_hold > 0.0)) throw ArgumentError("SacAgent: max_hold must be positive");
  RngStream init(seed, StreamId::Init);
  policy = nn::PolicyNet(vocab, max_hold, init, config.hidden);
  q1 = nn::CriticNet("q1", vocab, max_hold, init, config.hidden);
  q2 = nn::CriticNet("q2", vocab, max_hold, init, config.hidden);
  q1_target = q1;
  q2_target = q2;
  log_alpha = nn::Param("log_alpha", Matrix::Constant(1, 1, std::log(config.alpha_init)));
}

double SacAgent::alpha() const { return std::exp(log_alpha.value(0, 0)); }

double SacAgent::sample_action(const StateVector& state, RngStream& rng) const {
  const auto head = policy.forward(std::span<const StateVector>(&state, 1), nullptr);
  return nn::squashed_sample(head.mean(0), head.log_std(0), rng.normal(), policy.max_hold).action;
}

ActionValues SacAgent::min_q(std::span<const StateVector> states, const RowVector& actions) const {
  nn::CriticNet::Tape t1, t2;
  const RowVector v1 = q1.forward(states, actions, &t1);
  const RowVector v2 = q2.forward(states, actions, &t2);
  const Eigen::Index n = v1.size();
  RowVector pick1(n), pick2(n);
  ActionValues out;
  out.q.resize(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const bool first = v1(b) <= v2(b);
    pick1(b) = first ? 1.0 : 0.0;
    pick2(b) = first ? 0.0 : 1.0;
    out.q(b) = first ? v1(b) : v2(b);
  }
  out.dq_da = q1.action_gradient(t1, pick1) + q2.action_gradient(t2, pick2);
  return out;
}

RowVector SacAgent::critic_target(const Batch& batch, const RowVector& noise) const {
  const auto head = policy.forward(batch.next_states, nullptr);
  const Eigen::Index n = head.mean.size();
  RowVector next_actions(n), next_logp(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto s = nn::squashed_sample(head.mean(b), head.log_std(b), noise(b), policy.max_hold);
    next_actions(b) = s.action;
    next_logp(b) = s.log_prob;
  }
  const RowVector t1 = q1_target.forward(batch.next_states, next_actions, nullptr);
  const RowVector t2 = q2_target.forward(batch.next_states, next_actions, nullptr);
  const double a = alpha();
  RowVector y(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double soft_value = std::min(t1(b), t2(b)) - a * next_logp(b);
    const double continuation = config.gamma * (1.0 - batch.done(b));
    y(b) = config.reward_scale * batch.rewards(b) + (continuation == 0.0 ? 0.0 : continuation * soft_value);
  }
  return y;
}

std::pair<double, double> SacAgent::critic_update(const Batch& batch, const RowVector& y) {
  const nn::AdamConfig adam{.lr = config.lr};
  const auto p1 = q1.params();
  const auto p2 = q2.params();
  nn::zero_grad(p1);
  nn::zero_grad(p2);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  double l1 = nan, l2 = nan;
  try {
    l1 = critic_loss(q1, batch, y, true);
    l2 = critic_loss(q2, batch, y, true);
  } catch (const GradientError&) {
    return {l1, nan};
  }
  nn::adam_step(p1, q1_opt, adam);
  nn::adam_step(p2, q2_opt, adam);
  return {l1, l2};
}

double SacAgent::actor_update(const Batch& batch, const RowVector& noise, RowVector* log_probs) {
  const auto params = policy.params();
  nn::zero_grad(params);
  const ActionValueFn q = [this](std::span<const StateVector> s, const RowVector& a) { return min_q(s, a); };
  try {
    const double loss = actor_loss(policy, batch.states, noise, alpha(), q, true, log_probs);
    nn::adam_step(params, policy_opt, nn::AdamConfig{.lr = config.lr});
    return loss;
  } catch (const GradientError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

double SacAgent::temperature_update(const RowVector& log_probs) {
  double grad = 0.0;
  temperature_loss(log_alpha.value(0, 0), log_probs, config.target_entropy, &grad);
  if (std::isfinite(grad)) {
    log_alpha.grad(0, 0) = grad;
    nn::adam_step({&log_alpha}, alpha_opt, nn::AdamConfig{.lr = config.lr});
  }
  return alpha();
}

void SacAgent::update_targets() {
  nn::polyak_update(std::as_const(q1).params(), q1_target.params(), config.tau);
  nn::polyak_update(std::as_const(q2).params(), q2_target.params(), config.tau);
}

UpdateStats SacAgent::update(const Batch& batch, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  UpdateStats st;
  RowVector noise(n);
  for (Eigen::Index b = 0; b < n; ++b) noise(b) = rng.normal();
  const RowVector y = critic_target(batch, noise);
  std::tie(st.critic1_loss, st.critic2_loss) = critic_update(batch, y);
  if (!std::isfinite(st.critic1_loss) || !std::isfinite(st.critic2_loss)) {
    st.finite = false;
    return st;
  }
  for (Eigen::Index b = 0; b < n; ++b) noise(b) = rng.normal();
  RowVector logp;
  st.actor_loss = actor_update(batch, noise, &logp);
  if (!std::isfinite(st.actor_loss)) {
    st.finite = false;
    return st;
  }
  st.alpha = temperature_update(logp);
  update_targets();
  ++global_step;
  st.finite = std::isfinite(st.alpha) && st.alpha > 0.0;
  return st;
}

double SacController::observe(const StateVector& state) {
  return rng_ != nullptr ? agent_.sample_action(state, *rng_) : agent_.deterministic_action(state);
}

// ---- Training ------------------------------------------------------------------------

void write_metrics_csv(std::ostream& out, std::span<const EpisodeMetrics> metrics) {
  auto field = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  out << kMetricsHeader << '\n';
  for (const auto& m : metrics) {
    out << m.episode << ',' << field(m.cum_reward) << ',' << field(m.alpha) << ',' << field(m.actor_loss) << ','
        << field(m.critic_loss) << ',' << m.buffer_size << '\n';
  }
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t k) {
  // splitmix64 finalizer over seed and episode index
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrainResult train(const ScenarioConfig& scenario, const SacConfig& config, int episodes, std::uint64_t seed,
                  const EpisodeCallback& on_episode) {
  return train(scenario, SacAgent(config, scenario.max_hold_secs, seed), episodes, seed, on_episode);
}

TrainResult train(const ScenarioConfig& scenario, SacAgent agent, int episodes, std::uint64_t seed,
                  const EpisodeCallback& on_episode) {
  if (episodes < 0) throw ArgumentError("train: episodes must be non-negative");
  scenario.validate();
  agent.config.validate();
  const SacConfig& cfg = agent.config;

  TrainResult result;
  ReplayBuffer buffer(cfg.buffer_capacity);
  RngStream rollout_rng(seed, StreamId::Policy);
  RngStream update_rng(seed, StreamId::Replay);
  SacAgent last_good = agent;

  for (int k = 0; k < episodes; ++k) {
    const long index = agent.episode;
    SacController controller(agent, &rollout_rng);
    EpisodeResult ep = run_controlled_episode(scenario, controller, episode_seed(seed, static_cast<std::uint64_t>(index)));
    const std::size_t decisions = ep.transitions.size();
    buffer.append(ep.transitions);

    EpisodeMetrics m;
    m.episode = index;
    m.cum_reward = ep.cumulative_reward;
    m.actor_loss = std::numeric_limits<double>::quiet_NaN();
    m.critic_loss = std::numeric_limits<double>::quiet_NaN();

    if (buffer.size() >= static_cast<std::size_t>(cfg.warmup_tuples)) {
      const long updates = cfg.updates_per_episode > 0 ? cfg.updates_per_episode : static_cast<long>(decisions);
      double actor_sum = 0.0, critic_sum = 0.0;
      long done_updates = 0;
      for (long u = 0; u < updates; ++u) {
        auto sample = buffer.sample(static_cast<std::size_t>(cfg.batch_size), update_rng);
        if (!sample) break;
        const UpdateStats st = agent.update(Batch::from(*sample), update_rng);
        if (!st.finite) {
          std::ostringstream msg;
          msg << "non-finite loss in episode " << index << " at global step " << agent.global_step
              << " (critic1 " << st.critic1_loss << ", critic2 " << st.critic2_loss << ", actor " << st.actor_loss
              << ", alpha " << st.alpha << ")";
          result.diverged = true;
          result.diagnostic = msg.str();
          break;
        }
        actor_sum += st.actor_loss;
        critic_sum += 0.5 * (st.critic1_loss + st.critic2_loss);
        ++done_updates;
      }
      if (result.diverged) break;
      if (done_updates > 0) {
        m.actor_loss = actor_sum / static_cast<double>(done_updates);
        m.critic_loss = critic_sum / static_cast<double>(done_updates);
      }
    }
    ++agent.episode;
    m.alpha = agent.alpha();
    m.buffer_size = buffer.size();
    result.metrics.push_back(m);
    if (on_episode) on_episode(m);
    last_good = agent;
  }
  result.agent = result.diverged ? std::move(last_good) : std::move(agent);
  return result;
}

EvaluationResult evaluate(const ScenarioConfig& scenario, const SacAgent& agent, int rollouts,
                          std::uint64_t base_seed) {
  if (rollouts < 1) throw ArgumentError("evaluate: rollouts must be at least 1");
  EvaluationResult r;
  for (int k = 0; k < rollouts; ++k) {
    SacController controller(agent, nullptr);
    r.rewards.push_back(
        run_controlled_episode(scenario, controller, episode_seed(base_seed, static_cast<std::uint64_t>(k)))
            .cumulative_reward);
  }
  double sum = 0.0;
  for (double x : r.rewards) sum += x;
  r.mean = sum / static_cast<double>(rollouts);
  if (rollouts > 1) {
    double ss = 0.0;
    for (double x : r.rewards) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(rollouts - 1));
  }
  return r;
}

}  // namespace bushold
