#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "bushold/analytics.hpp"
#include "bushold/control.hpp"
#include "bushold/corridor.hpp"
#include "bushold/error.hpp"
#include "bushold/sac.hpp"
#include "bushold/simulator.hpp"

namespace py = pybind11;
using namespace bushold;

namespace {

Direction to_direction(int d) {
  if (d != 0 && d != 1) throw ArgumentError("direction must be 0 (down) or 1 (up)");
  return direction_from_int(d);
}

std::unique_ptr<HoldingController> make_controller(const std::string& name, const ScenarioConfig& sc, double hold) {
  if (name == "none") return std::make_unique<NoControl>();
  if (name == "rule") return std::make_unique<RuleHolder>(sc.max_hold_secs, sc.target_headway_secs);
  if (name == "constant") return std::make_unique<ConstantHold>(hold);
  throw ArgumentError("unknown controller '" + name + "' (expected none, rule or constant)");
}

py::dict summarize(const EpisodeResult& r) {
  py::dict d;
  d["cumulative_reward"] = r.cumulative_reward;
  d["trace_hash"] = r.log.trace_hash();
  d["transitions"] = r.transitions.size();
  d["decisions"] = r.log.totals.decisions;
  d["warnings"] = r.log.totals.warnings;
  d["fleet_size"] = r.log.totals.fleet_size;
  d["trips"] = py::make_tuple(r.log.totals.trips[0], r.log.totals.trips[1]);
  d["end_time"] = r.log.totals.end_time;
  d["passengers_generated"] = r.log.totals.passengers_generated;
  d["passengers_delivered"] = r.log.totals.passengers_delivered;
  d["bunching_events"] = detect_bunching(r.log).size();
  std::vector<double> rewards;
  rewards.reserve(r.transitions.size());
  for (const auto& t : r.transitions) rewards.push_back(t.reward);
  d["rewards"] = rewards;
  std::ostringstream csv;
  r.log.write_csv(csv);
  d["log_csv"] = csv.str();
  return d;
}

py::list bunching_list(const EpisodeLog& log, double threshold) {
  py::list out;
  for (const auto& e : detect_bunching(log, threshold)) {
    py::dict d;
    d["time"] = e.time;
    d["hour"] = e.hour;
    d["stop"] = e.stop;
    d["direction"] = to_int(e.direction);
    d["leading_bus"] = e.leading_bus;
    d["trailing_bus"] = e.trailing_bus;
    d["gap"] = e.gap;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(bushold, m) {
  m.doc() = "Bus holding control: corridor simulator and soft actor-critic trainer";

  py::register_exception<LoadError>(m, "LoadError", PyExc_OSError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_RuntimeError);
  py::register_exception<GradientError>(m, "GradientError", PyExc_ArithmeticError);

  m.def("reward", &reward, py::arg("h_f"), py::arg("h_b"), "Headway reward for realized forward/backward headways.");
  m.def(
      "generate_timetable",
      [](int interval, int offset, int horizon) { return generate_timetable(interval, offset, horizon).departures; },
      py::arg("interval_secs"), py::arg("offset_secs"), py::arg("horizon_secs"), "Departure times in seconds.");
  m.def("hour_index", &hour_index, py::arg("sim_time"));

  py::class_<ScenarioConfig>(m, "Scenario")
      .def_readwrite("speed_sigma", &ScenarioConfig::speed_sigma)
      .def_readwrite("max_hold_secs", &ScenarioConfig::max_hold_secs)
      .def_readwrite("target_headway_secs", &ScenarioConfig::target_headway_secs)
      .def_readwrite("bus_capacity", &ScenarioConfig::bus_capacity)
      .def_readwrite("max_fleet", &ScenarioConfig::max_fleet)
      .def_readonly("rng_seed", &ScenarioConfig::rng_seed)
      .def("departures", [](const ScenarioConfig& sc, int d) { return sc.timetable(to_direction(d)).departures; },
           py::arg("direction"))
      .def("total_demand", [](const ScenarioConfig& sc, int hour) { return total_demand(sc, hour); }, py::arg("hour"))
      .def("mean_speed", &ScenarioConfig::mean_speed, py::arg("segment"), py::arg("hour"))
      .def("validate", &ScenarioConfig::validate)
      .def("__eq__", [](const ScenarioConfig& a, const ScenarioConfig& b) { return a == b; });

  m.def("synthetic_scenario", &generate_synthetic_scenario, py::arg("seed") = 7);
  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("save_scenario", &save_scenario, py::arg("scenario"), py::arg("path"));

  m.def(
      "run_episode",
      [](const ScenarioConfig& sc, const std::string& controller, std::uint64_t seed, double hold) {
        auto ctl = make_controller(controller, sc, hold);
        EpisodeResult r;
        {
          py::gil_scoped_release release;
          r = run_controlled_episode(sc, *ctl, seed);
        }
        return summarize(r);
      },
      py::arg("scenario"), py::arg("controller") = "none", py::arg("seed") = 7, py::arg("hold") = 0.0,
      "Simulate one day with a built-in controller ('none', 'rule' or 'constant').");

  m.def(
      "bunching_events",
      [](const ScenarioConfig& sc, const std::string& controller, std::uint64_t seed, double threshold) {
        auto ctl = make_controller(controller, sc, 0.0);
        return bunching_list(run_controlled_episode(sc, *ctl, seed).log, threshold);
      },
      py::arg("scenario"), py::arg("controller") = "none", py::arg("seed") = 7,
      py::arg("threshold") = kDefaultBunchingThreshold);

  m.def(
      "smooth",
      [](const std::vector<double>& xs, const std::string& kind) {
        if (kind == "rolling10") return smooth(xs, SmoothKind::Rolling10);
        if (kind == "ewm03") return smooth(xs, SmoothKind::Ewm03);
        throw ArgumentError("kind must be 'rolling10' or 'ewm03'");
      },
      py::arg("series"), py::arg("kind") = "rolling10");

  py::class_<SacConfig>(m, "SacConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &SacConfig::gamma)
      .def_readwrite("tau", &SacConfig::tau)
      .def_readwrite("lr", &SacConfig::lr)
      .def_readwrite("batch_size", &SacConfig::batch_size)
      .def_readwrite("target_entropy", &SacConfig::target_entropy)
      .def_readwrite("warmup_tuples", &SacConfig::warmup_tuples)
      .def_readwrite("updates_per_episode", &SacConfig::updates_per_episode)
      .def_readwrite("alpha_init", &SacConfig::alpha_init)
      .def_readwrite("buffer_capacity", &SacConfig::buffer_capacity)
      .def_readwrite("hidden", &SacConfig::hidden)
      .def_readwrite("reward_scale", &SacConfig::reward_scale)
      .def("validate", &SacConfig::validate);

  py::class_<SacAgent>(m, "Agent")
      .def_property_readonly("alpha", &SacAgent::alpha)
      .def_readonly("global_step", &SacAgent::global_step)
      .def_readonly("episode", &SacAgent::episode)
      .def_readonly("config", &SacAgent::config)
      .def(
          "action",
          [](const SacAgent& a, int bus_id, int stop_id, int time_period, int direction, double h_f_norm,
             double h_b_norm, double seg_speed_norm) {
            StateVector s{bus_id, stop_id, time_period, direction, h_f_norm, h_b_norm, seg_speed_norm, false};
            return a.deterministic_action(s);
          },
          py::arg("bus_id"), py::arg("stop_id"), py::arg("time_period"), py::arg("direction"), py::arg("h_f_norm"),
          py::arg("h_b_norm"), py::arg("seg_speed_norm"), "Deterministic hold in seconds.")
      .def(
          "run_episode",
          [](const SacAgent& a, const ScenarioConfig& sc, std::uint64_t seed) {
            SacController ctl(a, nullptr);
            return summarize(run_controlled_episode(sc, ctl, seed));
          },
          py::arg("scenario"), py::arg("seed") = 7, "One day under the deterministic policy.");

  m.def(
      "train",
      [](const ScenarioConfig& sc, const SacConfig& cfg, int episodes, std::uint64_t seed) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(sc, cfg, episodes, seed);
        }
        std::vector<double> rewards;
        for (const auto& em : r.metrics) rewards.push_back(em.cum_reward);
        py::dict d;
        d["agent"] = py::cast(std::move(r.agent));
        d["rewards"] = rewards;
        d["diverged"] = r.diverged;
        d["diagnostic"] = r.diagnostic;
        return d;
      },
      py::arg("scenario"), py::arg("config"), py::arg("episodes"), py::arg("seed") = 7);

  m.def(
      "evaluate",
      [](const ScenarioConfig& sc, const SacAgent& agent, int rollouts, std::uint64_t seed) {
        const auto r = evaluate(sc, agent, rollouts, seed);
        py::dict d;
        d["rewards"] = r.rewards;
        d["mean"] = r.mean;
        d["std"] = r.std;
        return d;
      },
      py::arg("scenario"), py::arg("agent"), py::arg("rollouts") = 5, py::arg("seed") = 7);

  m.def("save_checkpoint", &save_checkpoint, py::arg("agent"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
}
