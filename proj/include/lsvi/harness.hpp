#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsvi/agent.hpp"
#include "lsvi/envs.hpp"
#include "lsvi/episode.hpp"

namespace lsvi {

struct EnvDescriptor {
  std::string generator = "simplex";  // simplex | tabular | file
  int d = 6;
  int num_states = 8;
  int num_actions = 4;
  int horizon = 4;
  std::uint64_t seed = 1;
  bool per_seed = false;  // generator seed = seed + run seed
  std::string path;
};

struct AgentDescriptor {
  std::string algorithm = "lsvi_ucb_pp";  // lsvi_ucb_pp | lsvi_ucb | random
  Mode mode = Mode::kPractical;
  double lambda = 0.0625;
  double c_beta = 0.02;
  double c_bar = 0.02;
  double c_tilde = 0.02;
  double sigma_floor_scale = 0.001;
  double gap_scale = 0.001;
  double delta = 0.01;
  double c_baseline = 0.02;
  double baseline_lambda = 1.0;
  std::string update_mode = "every_episode";
};

struct MonitorSettings {
  int sampled_states = 8;  // per stage, on episodes without a refresh
  bool all_states_every_episode = false;
  bool check_optimism = false;
};

struct RunConfig {
  EnvDescriptor env;
  AgentDescriptor agent;
  int num_episodes = 1000;
  std::vector<std::uint64_t> seeds{1};
  int jobs = 1;
  MonitorSettings monitor;
  std::string debug_log_dir;  // empty: no per-step debug log

  void validate() const;
};

struct InvariantTally {
  long long checks = 0;
  long long violations = 0;
  void record(bool ok) {
    ++checks;
    if (!ok) ++violations;
  }
};

/// Invariant monitor counts. Which of them are hard depends on the algorithm;
/// see SeedResult::hard_invariants_ok.
struct MonitorTallies {
  InvariantTally monotonicity;
  InvariantTally ordering;
  InvariantTally weight_norm;
  InvariantTally sigma_bar_lower;
  InvariantTally sigma_bar_upper;
  InvariantTally switch_bound;
  InvariantTally optimism;
  InvariantTally regret_nonnegative;
  InvariantTally monitor_purity;

  MonitorTallies& operator+=(const MonitorTallies& other);
  nlohmann::json to_json() const;
};

struct PhaseTiming {
  double plan_s = 0.0;
  double regret_s = 0.0;
  double monitor_s = 0.0;
  double rollout_s = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::string algorithm;
  std::vector<double> episodic_regret;
  std::vector<double> cum_regret;
  std::vector<int> refreshed;
  std::vector<int> refresh_total;
  std::vector<double> sigma_bar_mean;
  std::vector<long long> q_violations;
  std::vector<int> refresh_episodes;
  double switch_bound = 0.0;
  double sigma_bar_min = 0.0;
  double sigma_bar_max = 0.0;
  double max_weight_norm_ratio = 0.0;  // max ||w|| / bound over the run
  MonitorTallies tallies;
  PhaseTiming timing;

  int num_episodes() const { return static_cast<int>(cum_regret.size()); }
  bool hard_invariants_ok() const;
  /// Deterministic serialization (no timing).
  nlohmann::json to_json() const;
};

using AgentFactory =
    std::function<std::unique_ptr<EpisodicAgent>(const RunConfig&, const LinearMdpSpec&)>;

LinearMdpSpec build_environment(const EnvDescriptor& env, std::uint64_t run_seed);
std::unique_ptr<EpisodicAgent> build_agent(const RunConfig& config, const LinearMdpSpec& env);

/// Greedy (or stochastic) policy of the agent for the current episode.
StochasticPolicy episode_policy_snapshot(const EpisodicAgent& agent, const LinearMdpSpec& env);

SeedResult run_seed(const RunConfig& config, std::uint64_t seed,
                    const AgentFactory& factory = build_agent);

/// One SeedResult per configured seed, in seed order; seeds run on up to
/// config.jobs threads.
std::vector<SeedResult> run_experiment(const RunConfig& config,
                                       const AgentFactory& factory = build_agent);

struct SeedSummary {
  int num_episodes = 0;
  int num_seeds = 0;
  std::vector<double> mean_cum_regret;
  std::vector<double> stderr_cum_regret;
  std::vector<double> mean_episodic_regret;
  std::vector<double> stderr_episodic_regret;
  std::vector<int> switch_counts;
  MonitorTallies totals;

  nlohmann::json to_json() const;
};

SeedSummary aggregate_seeds(const std::vector<SeedResult>& results);

/// Per-seed CSV: k, episodic_regret, cum_regret, refreshed, refresh_total,
/// sigma_bar_mean, q_violations.
std::string seed_csv(const SeedResult& result);

}  // namespace lsvi
