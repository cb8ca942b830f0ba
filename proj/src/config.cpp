#include "lsvi/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lsvi/baselines.hpp"

namespace lsvi {

namespace {

void collect_keys(const nlohmann::json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      collect_keys(*it, key, out);
    else
      out.push_back(key);
  }
}

nlohmann::json::json_pointer pointer_for(const std::string& dotted) {
  std::string path;
  std::stringstream ss(dotted);
  for (std::string part; std::getline(ss, part, '.');) path += "/" + part;
  return nlohmann::json::json_pointer(path);
}

double parse_double(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || errno == ERANGE)
    throw std::invalid_argument("override " + key + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (text.empty() || end != begin + text.size() || errno == ERANGE)
    throw std::invalid_argument("override " + key + ": expected an integer, got '" + text + "'");
  return v;
}

nlohmann::json parse_typed(const std::string& key, const std::string& text,
                           const nlohmann::json& like) {
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::invalid_argument("override " + key + ": expected a boolean, got '" + text + "'");
  }
  if (like.is_number_integer()) return parse_integer(key, text);
  if (like.is_number()) return parse_double(key, text);
  if (like.is_array()) {
    nlohmann::json arr = nlohmann::json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) arr.push_back(parse_integer(key, item));
    if (arr.empty()) throw std::invalid_argument("override " + key + ": expected a comma-separated integer list");
    return arr;
  }
  return text;
}

const nlohmann::json& schema() {
  static const nlohmann::json s = default_config();
  return s;
}

}  // namespace

nlohmann::json default_config() {
  return {
      {"env",
       {{"generator", "simplex"}, {"d", 6}, {"S", 8}, {"A", 4}, {"H", 4},
        {"seed", 1}, {"per_seed", false}, {"path", ""}}},
      {"agent",
       {{"algorithm", "lsvi_ucb_pp"}, {"mode", "practical"}, {"lambda", 0.0625},
        {"c_beta", 0.02}, {"c_bar", 0.02}, {"c_tilde", 0.02}, {"sigma_floor_scale", 0.001}, {"gap_scale", 0.001},
        {"delta", 0.01}, {"c_baseline", 0.02}, {"baseline_lambda", 1.0},
        {"update_mode", "every_episode"}}},
      {"harness",
       {{"K", 1000}, {"seeds", {1}}, {"jobs", 1},
        {"monitor", {{"sampled_states", 8}, {"all_states_every_episode", false}, {"check_optimism", false}}},
        {"debug_log", false}}},
  };
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_keys(schema(), "", keys);
  std::sort(keys.begin(), keys.end());
  return keys;
}

nlohmann::json materialize_config(const nlohmann::json& user) {
  if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
  const std::vector<std::string> keys = config_keys();
  std::vector<std::string> present;
  collect_keys(user, "", present);
  for (const auto& k : present)
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw std::invalid_argument("unknown config key '" + k + "'");

  auto get = [&](const std::string& key) -> const nlohmann::json* {
    const auto ptr = pointer_for(key);
    return user.contains(ptr) ? &user.at(ptr) : nullptr;
  };

  nlohmann::json out = default_config();
  for (const auto& k : present) {
    const auto ptr = pointer_for(k);
    const nlohmann::json& like = out.at(ptr);
    const nlohmann::json& value = user.at(ptr);
    const bool compatible = (like.is_number() && value.is_number() &&
                             (!like.is_number_integer() || value.is_number_integer())) ||
                            (like.is_boolean() && value.is_boolean()) ||
                            (like.is_string() && value.is_string()) ||
                            (like.is_array() && value.is_array());
    if (!compatible)
      throw std::invalid_argument("config key '" + k + "' has type " + value.type_name() +
                                  ", expected " + like.type_name());
    out[ptr] = value;
  }

  const Mode mode = parse_mode(out["agent"]["mode"].get<std::string>());
  auto& env = out["env"];
  if (env["generator"] == "file") {
    const LinearMdpSpec spec = load_spec(env["path"].get<std::string>());
    env["d"] = spec.d;
    env["S"] = spec.num_states;
    env["A"] = spec.num_actions;
    env["H"] = spec.horizon;
  } else if (env["generator"] == "tabular") {
    env["d"] = env["S"].get<int>() * env["A"].get<int>();
  }

  const int H = env["H"].get<int>();
  auto& agent = out["agent"];
  if (get("agent.lambda") == nullptr) agent["lambda"] = 1.0 / (static_cast<double>(H) * H);
  const double scale = mode == Mode::kPractical ? 0.02 : 1.0;
  for (const char* key : {"c_beta", "c_bar", "c_tilde", "c_baseline"})
    if (get(std::string("agent.") + key) == nullptr) agent[key] = scale;
  if (get("agent.sigma_floor_scale") == nullptr)
    agent["sigma_floor_scale"] = mode == Mode::kPractical ? 0.001 : 1.0;
  if (get("agent.gap_scale") == nullptr) agent["gap_scale"] = mode == Mode::kPractical ? 0.001 : 1.0;
  return out;
}

nlohmann::json apply_overrides(const nlohmann::json& config, const std::vector<std::string>& overrides) {
  nlohmann::json out = config;
  const std::vector<std::string> keys = config_keys();
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override '" + item + "' is not of the form key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string msg = "unknown config key '" + key + "'; valid keys:";
      for (const auto& k : keys) msg += "\n  " + k;
      throw std::invalid_argument(msg);
    }
    out[pointer_for(key)] = parse_typed(key, value, schema().at(pointer_for(key)));
  }
  return out;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    const auto& env = j.at("env");
    c.env.generator = env.at("generator").get<std::string>();
    c.env.d = env.at("d").get<int>();
    c.env.num_states = env.at("S").get<int>();
    c.env.num_actions = env.at("A").get<int>();
    c.env.horizon = env.at("H").get<int>();
    c.env.seed = env.at("seed").get<std::uint64_t>();
    c.env.per_seed = env.at("per_seed").get<bool>();
    c.env.path = env.at("path").get<std::string>();

    const auto& agent = j.at("agent");
    c.agent.algorithm = agent.at("algorithm").get<std::string>();
    c.agent.mode = parse_mode(agent.at("mode").get<std::string>());
    c.agent.lambda = agent.at("lambda").get<double>();
    c.agent.c_beta = agent.at("c_beta").get<double>();
    c.agent.c_bar = agent.at("c_bar").get<double>();
    c.agent.c_tilde = agent.at("c_tilde").get<double>();
    c.agent.sigma_floor_scale = agent.at("sigma_floor_scale").get<double>();
    c.agent.gap_scale = agent.at("gap_scale").get<double>();
    c.agent.delta = agent.at("delta").get<double>();
    c.agent.c_baseline = agent.at("c_baseline").get<double>();
    c.agent.baseline_lambda = agent.at("baseline_lambda").get<double>();
    c.agent.update_mode = agent.at("update_mode").get<std::string>();

    const auto& harness = j.at("harness");
    c.num_episodes = harness.at("K").get<int>();
    c.seeds = harness.at("seeds").get<std::vector<std::uint64_t>>();
    c.jobs = harness.at("jobs").get<int>();
    const auto& monitor = harness.at("monitor");
    c.monitor.sampled_states = monitor.at("sampled_states").get<int>();
    c.monitor.all_states_every_episode = monitor.at("all_states_every_episode").get<bool>();
    c.monitor.check_optimism = monitor.at("check_optimism").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  parse_update_mode(c.agent.update_mode);
  c.validate();
  return c;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("cannot parse " + path + ": " + e.what());
  }
}

}  // namespace lsvi
