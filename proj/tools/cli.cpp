#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "bushold/analytics.hpp"
#include "bushold/control.hpp"
#include "bushold/corridor.hpp"
#include "bushold/error.hpp"
#include "bushold/sac.hpp"

namespace bushold::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

/// Input or I/O problem reported with exit code 2.
struct InputFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputFailure("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputFailure("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw InputFailure("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputFailure("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputFailure("cannot create output directory " + dir.string());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects written artifacts and renders the run manifest.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args), started_(utc_now()), t0_(Clock::now()) {}

  void set(const std::string& key, nlohmann::json value) { fields_[key] = std::move(value); }

  /// Writes `content` atomically into `dir` and records its hash.
  void artifact(const fs::path& dir, const std::string& name, const std::string& content) {
    write_atomic(dir / name, content);
    artifacts_[name] = "fnv1a64:" + fnv1a_hex(content);
  }
  void artifact_from_disk(const fs::path& dir, const std::string& name) {
    artifacts_[name] = "fnv1a64:" + fnv1a_hex(read_file(dir / name));
  }

  void write(const fs::path& dir) const {
    nlohmann::json j;
    j["command"] = command_;
    j["argv"] = args_;
    for (const auto& [k, v] : fields_) j[k] = v;
    j["started_at"] = started_;
    j["wall_clock_s"] = std::chrono::duration<double>(Clock::now() - t0_).count();
    j["artifacts"] = artifacts_;
    write_atomic(dir / "manifest.json", j.dump(1) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::string started_;
  Clock::time_point t0_;
  std::map<std::string, nlohmann::json> fields_;
  std::map<std::string, std::string> artifacts_;
};

std::string render(const auto& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

ScenarioConfig load_or_fail(const std::string& dir) {
  if (dir.empty()) throw InputFailure("--scenario is required");
  return load_scenario(dir);
}

SacAgent load_agent(const std::string& path, const char* what) {
  if (path.empty()) throw InputFailure(std::string(what) + " requires --checkpoint");
  if (!fs::exists(path)) throw InputFailure("checkpoint not found: " + path);
  return load_checkpoint(path);
}

// ---- Commands ------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 7;
};

int cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m("gen-data", argv);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const ScenarioConfig sc = generate_synthetic_scenario(a.seed);
  save_scenario(sc, dir);
  for (const char* f : {"stops.csv", "od.csv", "speeds.csv", "timetable.csv", "scenario.cfg"}) m.artifact_from_disk(dir, f);
  load_scenario(dir);  // the written files must load cleanly
  m.set("seed", a.seed);
  m.set("output_dir", a.out);
  m.write(dir);
  out << "wrote scenario to " << a.out << "\n";
  return kOk;
}

struct SimulateArgs {
  std::string scenario;
  std::string controller = "none";
  std::string checkpoint;
  std::string out;
  std::uint64_t seed = 7;
  double threshold = kDefaultBunchingThreshold;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m("simulate", argv);
  const ScenarioConfig sc = load_or_fail(a.scenario);
  std::optional<SacAgent> agent;
  if (a.controller == "sac") agent = load_agent(a.checkpoint, "--controller sac");

  std::unique_ptr<HoldingController> ctrl;
  if (a.controller == "none") ctrl = std::make_unique<NoControl>();
  else if (a.controller == "rule") ctrl = std::make_unique<RuleHolder>(sc.max_hold_secs, sc.target_headway_secs);
  else ctrl = std::make_unique<SacController>(*agent, nullptr);

  const fs::path dir(a.out);
  ensure_dir(dir);
  const EpisodeResult r = run_controlled_episode(sc, *ctrl, a.seed);
  const auto events = detect_bunching(r.log, a.threshold);
  const auto stats = bunching_stats(events);

  m.artifact(dir, "episode_log.csv", render([&](std::ostream& s) { r.log.write_csv(s); }));
  m.artifact(dir, "bunching.csv", render([&](std::ostream& s) { write_bunching_csv(s, events); }));
  m.artifact(dir, "bunching_by_hour.csv", render([&](std::ostream& s) { write_bunching_by_hour_csv(s, stats); }));
  m.artifact(dir, "bunching_by_stop.csv", render([&](std::ostream& s) { write_bunching_by_stop_csv(s, stats); }));
  m.artifact(dir, "trajectories.csv", render([&](std::ostream& s) { write_trajectories_csv(s, r.log, sc); }));

  m.set("scenario", a.scenario);
  m.set("seed", a.seed);
  m.set("controller", a.controller);
  m.set("checkpoint", a.checkpoint);
  m.set("output_dir", a.out);
  m.set("cumulative_reward", r.cumulative_reward);
  m.set("bunching_events", events.size());
  m.write(dir);

  out << "controller=" << a.controller << " seed=" << a.seed << " cum_reward=" << format_double(r.cumulative_reward)
      << " bunching_events=" << events.size() << " decisions=" << r.log.totals.decisions
      << " trace_hash=" << std::hex << std::setw(16) << std::setfill('0') << r.log.trace_hash() << std::dec << "\n";
  return kOk;
}

struct TrainArgs {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 7;
  int episodes = 150;
  bool quiet = false;
  SacConfig config;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Manifest m("train", argv);
  const ScenarioConfig sc = load_or_fail(a.scenario);
  a.config.validate();
  const fs::path dir(a.out);
  ensure_dir(dir);

  const TrainResult res = train(sc, a.config, a.episodes, a.seed, [&](const EpisodeMetrics& em) {
    if (!a.quiet) {
      err << "episode " << em.episode << " cum_reward " << format_double(em.cum_reward) << " alpha "
          << format_double(em.alpha) << " buffer " << em.buffer_size << "\n";
    }
  });

  save_checkpoint(res.agent, (dir / "checkpoint.json").string());
  m.artifact_from_disk(dir, "checkpoint.json");
  std::vector<double> rewards;
  for (const auto& em : res.metrics) rewards.push_back(em.cum_reward);
  m.artifact(dir, "metrics.csv", render([&](std::ostream& s) { write_metrics_csv(s, res.metrics); }));
  m.artifact(dir, "reward_curve.csv", render([&](std::ostream& s) { write_reward_curve_csv(s, rewards); }));

  m.set("scenario", a.scenario);
  m.set("seed", a.seed);
  m.set("controller", "sac");
  m.set("checkpoint", (dir / "checkpoint.json").string());
  m.set("output_dir", a.out);
  m.set("episodes", a.episodes);
  m.set("episodes_completed", res.metrics.size());
  m.set("diverged", res.diverged);
  m.write(dir);

  if (res.diverged) {
    err << "training diverged: " << res.diagnostic << "\n"
        << "last good checkpoint kept at " << (dir / "checkpoint.json").string() << "\n";
    return kDiverged;
  }
  out << "episodes=" << res.metrics.size();
  if (!rewards.empty()) {
    out << " final_rolling10=" << format_double(smooth(rewards, SmoothKind::Rolling10).back());
  }
  out << " checkpoint=" << (dir / "checkpoint.json").string() << "\n";
  return kOk;
}

struct EvaluateArgs {
  std::string scenario;
  std::string checkpoint;
  std::string out = ".";
  int rollouts = 15;
  std::uint64_t seeds = 0;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest m("evaluate", argv);
  const ScenarioConfig sc = load_or_fail(a.scenario);
  const SacAgent agent = load_agent(a.checkpoint, "evaluate");
  const fs::path dir(a.out);
  ensure_dir(dir);

  const EvaluationResult ev = evaluate(sc, agent, a.rollouts, a.seeds);
  std::ostringstream csv;
  csv << "rollout,seed,cum_reward\n";
  for (std::size_t k = 0; k < ev.rewards.size(); ++k) {
    csv << k << ',' << episode_seed(a.seeds, k) << ',' << format_double(ev.rewards[k]) << '\n';
    out << "rollout " << k << " cum_reward=" << format_double(ev.rewards[k]) << "\n";
  }
  m.artifact(dir, "evaluation.csv", csv.str());
  m.set("scenario", a.scenario);
  m.set("seed", a.seeds);
  m.set("controller", "sac");
  m.set("checkpoint", a.checkpoint);
  m.set("output_dir", a.out);
  m.set("rollouts", a.rollouts);
  m.set("mean", ev.mean);
  m.set("std", ev.std);
  m.write(dir);
  out << "mean=" << format_double(ev.mean) << " std=" << format_double(ev.std) << " rollouts=" << a.rollouts << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bus corridor holding simulator and trainer", "busctl"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic scenario");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required()->envname("BUSHOLD_OUT");
  gen_cmd->add_option("--seed", gen.seed, "Scenario seed")->envname("BUSHOLD_SEED");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one episode and export logs and bunching tables");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario directory")->required()->envname("BUSHOLD_SCENARIO");
  sim_cmd->add_option("--controller", sim.controller, "Holding controller")
      ->check(CLI::IsMember({"none", "rule", "sac"}));
  sim_cmd->add_option("--checkpoint", sim.checkpoint, "Checkpoint (controller sac)")->envname("BUSHOLD_CHECKPOINT");
  sim_cmd->add_option("--seed", sim.seed, "Episode seed")->envname("BUSHOLD_SEED");
  sim_cmd->add_option("--out", sim.out, "Output directory")->required()->envname("BUSHOLD_OUT");
  sim_cmd->add_option("--bunching-threshold", sim.threshold, "Bunching gap threshold in seconds")
      ->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a holding policy");
  tr_cmd->add_option("--scenario", tr.scenario, "Scenario directory")->required()->envname("BUSHOLD_SCENARIO");
  tr_cmd->add_option("--episodes", tr.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
  tr_cmd->add_option("--seed", tr.seed, "Run seed")->envname("BUSHOLD_SEED");
  tr_cmd->add_option("--out", tr.out, "Output directory")->required()->envname("BUSHOLD_OUT");
  tr_cmd->add_flag("--quiet", tr.quiet, "No per-episode progress on stderr");
  tr_cmd->add_option("--gamma", tr.config.gamma)->envname("BUSHOLD_GAMMA");
  tr_cmd->add_option("--tau", tr.config.tau)->envname("BUSHOLD_TAU");
  tr_cmd->add_option("--lr", tr.config.lr)->envname("BUSHOLD_LR");
  tr_cmd->add_option("--batch-size", tr.config.batch_size)->envname("BUSHOLD_BATCH_SIZE");
  tr_cmd->add_option("--target-entropy", tr.config.target_entropy)->envname("BUSHOLD_TARGET_ENTROPY");
  tr_cmd->add_option("--warmup", tr.config.warmup_tuples, "Tuples collected before updates start")
      ->envname("BUSHOLD_WARMUP");
  tr_cmd->add_option("--updates-per-episode", tr.config.updates_per_episode, "0 means one per decision")
      ->envname("BUSHOLD_UPDATES_PER_EPISODE");
  tr_cmd->add_option("--alpha-init", tr.config.alpha_init)->envname("BUSHOLD_ALPHA_INIT");
  tr_cmd->add_option("--buffer-capacity", tr.config.buffer_capacity)->envname("BUSHOLD_BUFFER_CAPACITY");
  tr_cmd->add_option("--reward-scale", tr.config.reward_scale)->envname("BUSHOLD_REWARD_SCALE");
  tr_cmd->add_option("--hidden", tr.config.hidden, "Hidden layer widths, comma separated")->delimiter(',');

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Deterministic-policy rollouts of a checkpoint");
  ev_cmd->add_option("--scenario", ev.scenario, "Scenario directory")->required()->envname("BUSHOLD_SCENARIO");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->envname("BUSHOLD_CHECKPOINT");
  ev_cmd->add_option("--rollouts", ev.rollouts, "Number of rollouts")->check(CLI::PositiveNumber);
  ev_cmd->add_option("--seeds", ev.seeds, "Base seed")->envname("BUSHOLD_SEEDS");
  ev_cmd->add_option("--out", ev.out, "Output directory")->envname("BUSHOLD_OUT");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, args, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, args, out);
    if (tr_cmd->parsed()) return cmd_train(tr, args, out, err);
    if (ev_cmd->parsed()) return cmd_evaluate(ev, args, out);
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputFailure& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }
  return kUsage;
}

}  // namespace bushold::cli
