// Command-line driver: run experiments, validate or generate environments,
// and run the invariant self-test.
//
// Exit codes: 0 success, 1 invariant/validation failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsvi/agent.hpp"
#include "lsvi/baselines.hpp"
#include "lsvi/config.hpp"
#include "lsvi/envs.hpp"
#include "lsvi/harness.hpp"
#include "lsvi/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageError = 2;
constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string mode;
  long long seed = -1;
  int jobs = 0;
};

/// User config with --mode/--seed/--jobs/--set folded in, then materialized.
json resolve_config(const Options& opt) {
  json user = opt.config_path.empty() ? json::object() : lsvi::load_json_file(opt.config_path);
  std::vector<std::string> overrides;
  if (!opt.mode.empty()) overrides.push_back("agent.mode=" + opt.mode);
  if (opt.seed >= 0) overrides.push_back("harness.seeds=" + std::to_string(opt.seed));
  if (opt.jobs > 0) overrides.push_back("harness.jobs=" + std::to_string(opt.jobs));
  overrides.insert(overrides.end(), opt.overrides.begin(), opt.overrides.end());
  return lsvi::materialize_config(lsvi::apply_overrides(user, overrides));
}

json derived_parameters(const lsvi::RunConfig& config) {
  const auto& env = config.env;
  json out;
  if (config.agent.algorithm == "lsvi_ucb_pp") {
    lsvi::AgentConfig c;
    c.d = env.d;
    c.horizon = env.horizon;
    c.num_episodes = config.num_episodes;
    c.lambda = config.agent.lambda;
    c.c_beta = config.agent.c_beta;
    c.c_bar = config.agent.c_bar;
    c.c_tilde = config.agent.c_tilde;
    c.delta = config.agent.delta;
    const lsvi::Radii r = lsvi::theory_radii(c);
    out = {{"beta", r.beta}, {"beta_bar", r.beta_bar}, {"beta_tilde", r.beta_tilde},
           {"switch_bound", lsvi::switch_bound(env.d, env.horizon, config.num_episodes, c.lambda)}};
  } else if (config.agent.algorithm == "lsvi_ucb") {
    out = {{"beta_baseline", lsvi::LsviUcbConfig::theory_beta(env.d, env.horizon, config.num_episodes,
                                                              config.agent.delta, config.agent.c_baseline)}};
  }
  return out;
}

int cmd_run(const Options& opt) {
  const json echo = resolve_config(opt);
  lsvi::RunConfig config = lsvi::run_config_from_json(echo);
  if (echo["harness"]["debug_log"].get<bool>()) config.debug_log_dir = opt.out_dir;

  const std::vector<lsvi::SeedResult> results = lsvi::run_experiment(config);
  fs::create_directories(opt.out_dir);
  bool ok = true;
  json seeds = json::array();
  json timing = json::array();
  for (const auto& r : results) {
    const fs::path csv = fs::path(opt.out_dir) / (r.algorithm + "_seed" + std::to_string(r.seed) + ".csv");
    std::ofstream(csv) << lsvi::seed_csv(r);
    seeds.push_back(r.to_json());
    timing.push_back({{"seed", r.seed}, {"plan_s", r.timing.plan_s}, {"regret_s", r.timing.regret_s},
                      {"monitor_s", r.timing.monitor_s}, {"rollout_s", r.timing.rollout_s}});
    if (!r.hard_invariants_ok()) ok = false;
    std::cout << r.algorithm << " seed " << r.seed << ": cum_regret " << r.cum_regret.back()
              << ", refreshes " << r.refresh_episodes.size()
              << (r.hard_invariants_ok() ? "" : ", INVARIANT VIOLATIONS") << '\n';
  }
  const lsvi::SeedSummary summary = lsvi::aggregate_seeds(results);
  const json doc = {
      {"config", echo},
      {"derived", derived_parameters(config)},
      {"versions",
       {{"lsvi", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
      {"aggregate", summary.to_json()},
      {"seeds", seeds},
      {"timing", timing},
  };
  std::ofstream(fs::path(opt.out_dir) / "summary.json") << doc.dump(1) << '\n';
  std::cout << "wrote " << results.size() << " CSV file(s) and summary.json to " << opt.out_dir << '\n';
  return ok ? 0 : 1;
}

int cmd_validate_env(const Options& opt) {
  if (opt.config_path.empty()) {
    std::cerr << "validate-env: --config PATH to a serialized environment is required\n";
    return kUsageError;
  }
  const lsvi::LinearMdpSpec spec = lsvi::load_spec(opt.config_path);
  const lsvi::ValidationReport report = lsvi::validate_spec(spec);
  std::cout << report.to_string();
  return report.ok() ? 0 : 1;
}

int cmd_gen_env(const Options& opt) {
  Options env_opt = opt;
  env_opt.seed = -1;
  json echo = resolve_config(env_opt);
  lsvi::RunConfig config = lsvi::run_config_from_json(echo);
  if (opt.seed >= 0) config.env.seed = static_cast<std::uint64_t>(opt.seed);
  const lsvi::LinearMdpSpec spec = lsvi::build_environment(config.env, 0);
  fs::create_directories(opt.out_dir);
  const fs::path path = fs::path(opt.out_dir) / "env.json";
  lsvi::save_spec(spec, path.string());
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSVI-UCB++ experiments on finite linear MDPs"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config (or environment file for validate-env)");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "single run seed (replaces harness.seeds)");
    sub->add_option("--jobs", opt.jobs, "parallel seeds")->check(CLI::PositiveNumber);
    sub->add_option("--set", opt.overrides, "override key=value (repeatable)")->allow_extra_args(false);
    sub->add_option("--mode", opt.mode, "theory|practical")->check(CLI::IsMember({"theory", "practical"}));
  };
  CLI::App* run = app.add_subcommand("run", "run an experiment and write CSV/JSON");
  CLI::App* validate = app.add_subcommand("validate-env", "validate a serialized environment");
  CLI::App* gen = app.add_subcommand("gen-env", "generate and serialize an environment");
  CLI::App* selftest = app.add_subcommand("selftest", "run the deterministic invariant suite");
  for (CLI::App* sub : {run, validate, gen, selftest}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*validate) return cmd_validate_env(opt);
    if (*gen) return cmd_gen_env(opt);
    if (*selftest) {
      const int failures = lsvi::run_selftest(std::cout);
      std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
      return failures == 0 ? 0 : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return *validate ? 1 : kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
