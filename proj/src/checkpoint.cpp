// JSON checkpoint reader and writer. The layout is described in docs/formats.md.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "bushold/error.hpp"
#include "bushold/sac.hpp"

namespace bushold {

namespace {

using nlohmann::json;
using nn::Matrix;

constexpr const char* kFormat = "bushold-sac-checkpoint";
constexpr int kVersion = 1;

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j, const std::string& where) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw LoadError("checkpoint: array size does not match its shape at " + where);
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  return m;
}

json params_to_json(const nn::ConstParamList& params) {
  json out = json::array();
  for (const nn::Param* p : params) {
    json e = matrix_to_json(p->value);
    e["name"] = p->name;
    out.push_back(std::move(e));
  }
  return out;
}

void params_from_json(const json& j, const nn::ParamList& params, const std::string& net) {
  if (!j.is_array() || j.size() != params.size()) {
    throw LoadError("checkpoint: network '" + net + "' has " + std::to_string(j.size()) + " arrays, expected " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    const std::string where = net + "/" + p.name;
    if (j[i].at("name").get<std::string>() != p.name) {
      throw LoadError("checkpoint: expected array " + p.name + " in '" + net + "', found " +
                      j[i].at("name").get<std::string>());
    }
    Matrix m = matrix_from_json(j[i], where);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw LoadError("checkpoint: shape mismatch at " + where);
    }
    p.value = std::move(m);
    p.zero_grad();
  }
}

json adam_to_json(const nn::AdamState& s) {
  json m = json::array(), v = json::array();
  for (const auto& x : s.m) m.push_back(matrix_to_json(x));
  for (const auto& x : s.v) v.push_back(matrix_to_json(x));
  return {{"step", s.step}, {"m", std::move(m)}, {"v", std::move(v)}};
}

nn::AdamState adam_from_json(const json& j, const nn::ConstParamList& params, const std::string& name) {
  nn::AdamState s;
  s.step = j.at("step").get<long>();
  const auto& m = j.at("m");
  const auto& v = j.at("v");
  if (m.size() != v.size() || (!m.empty() && m.size() != params.size())) {
    throw LoadError("checkpoint: optimizer '" + name + "' does not match its network");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    s.m.push_back(matrix_from_json(m[i], name + "/m"));
    s.v.push_back(matrix_from_json(v[i], name + "/v"));
    if (s.m.back().rows() != params[i]->value.rows() || s.m.back().cols() != params[i]->value.cols() ||
        s.v.back().rows() != params[i]->value.rows() || s.v.back().cols() != params[i]->value.cols()) {
      throw LoadError("checkpoint: optimizer '" + name + "' shape mismatch at " + params[i]->name);
    }
  }
  return s;
}

json config_to_json(const SacConfig& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"target_entropy", c.target_entropy},
          {"warmup_tuples", c.warmup_tuples},
          {"updates_per_episode", c.updates_per_episode},
          {"alpha_init", c.alpha_init},
          {"buffer_capacity", c.buffer_capacity},
          {"hidden", c.hidden},
          {"reward_scale", c.reward_scale}};
}

SacConfig config_from_json(const json& j) {
  SacConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.target_entropy = j.at("target_entropy").get<double>();
  c.warmup_tuples = j.at("warmup_tuples").get<long>();
  c.updates_per_episode = j.at("updates_per_episode").get<long>();
  c.alpha_init = j.at("alpha_init").get<double>();
  c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.reward_scale = j.at("reward_scale").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const SacAgent& agent, const std::string& path) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["max_hold"] = agent.max_hold();
  j["vocab"] = {{"bus", agent.vocab.bus},
                {"stop", agent.vocab.stop},
                {"time", agent.vocab.time},
                {"direction", agent.vocab.direction}};
  j["config"] = config_to_json(agent.config);
  j["log_alpha"] = agent.log_alpha.value(0, 0);
  j["global_step"] = agent.global_step;
  j["episode"] = agent.episode;
  j["networks"] = {{"policy", params_to_json(agent.policy.params())},
                   {"q1", params_to_json(agent.q1.params())},
                   {"q2", params_to_json(agent.q2.params())},
                   {"q1_target", params_to_json(agent.q1_target.params())},
                   {"q2_target", params_to_json(agent.q2_target.params())}};
  j["adam"] = {{"policy", adam_to_json(agent.policy_opt)},
               {"q1", adam_to_json(agent.q1_opt)},
               {"q2", adam_to_json(agent.q2_opt)},
               {"log_alpha", adam_to_json(agent.alpha_opt)}};

  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write checkpoint " + tmp.string());
    out << j.dump(1) << '\n';
    out.flush();
    if (!out) throw LoadError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw LoadError("cannot move checkpoint into place at " + path);
  }
}

SacAgent load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) throw LoadError("checkpoint " + path + ": unknown format");
    if (j.at("version").get<int>() != kVersion) {
      throw LoadError("checkpoint " + path + ": unsupported version " + std::to_string(j.at("version").get<int>()));
    }
    nn::Vocab vocab;
    const auto& v = j.at("vocab");
    vocab.bus = v.at("bus").get<int>();
    vocab.stop = v.at("stop").get<int>();
    vocab.time = v.at("time").get<int>();
    vocab.direction = v.at("direction").get<int>();

    SacAgent agent(config_from_json(j.at("config")), j.at("max_hold").get<double>(), 0, vocab);
    const auto& nets = j.at("networks");
    params_from_json(nets.at("policy"), agent.policy.params(), "policy");
    params_from_json(nets.at("q1"), agent.q1.params(), "q1");
    params_from_json(nets.at("q2"), agent.q2.params(), "q2");
    params_from_json(nets.at("q1_target"), agent.q1_target.params(), "q1_target");
    params_from_json(nets.at("q2_target"), agent.q2_target.params(), "q2_target");
    const auto& adam = j.at("adam");
    agent.policy_opt = adam_from_json(adam.at("policy"), std::as_const(agent.policy).params(), "policy");
    agent.q1_opt = adam_from_json(adam.at("q1"), std::as_const(agent.q1).params(), "q1");
    agent.q2_opt = adam_from_json(adam.at("q2"), std::as_const(agent.q2).params(), "q2");
    agent.alpha_opt = adam_from_json(adam.at("log_alpha"), {&agent.log_alpha}, "log_alpha");
    agent.log_alpha.value(0, 0) = j.at("log_alpha").get<double>();
    agent.global_step = j.at("global_step").get<long>();
    agent.episode = j.at("episode").get<long>();
    return agent;
  } catch (const json::exception& e) {
    throw LoadError("checkpoint " + path + " is malformed: " + e.what());
  } catch (const ArgumentError& e) {
    throw LoadError("checkpoint " + path + " has an invalid configuration: " + e.what());
  }
}

}  // namespace bushold
