#include "lsvi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>

#include "lsvi/baselines.hpp"

namespace lsvi {

namespace {

constexpr double kMonotoneSlack = 1e-9;
constexpr double kOptimismSlack = 1e-9;
constexpr double kRegretSlack = 1e-10;
constexpr std::uint64_t kMonitorStream = 0x9E3779B97F4A7C15ULL;

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Watches an LSVI-UCB++ learner between episodes. Values are evaluated
/// through the snapshot list, not the agent's cached tables.
class PlusPlusMonitor {
 public:
  PlusPlusMonitor(const LinearMdpSpec& env, const MonitorSettings& settings, int num_episodes)
      : env_(env), settings_(settings), num_episodes_(num_episodes) {
    const auto cells = idx(env.horizon * env.num_states);
    last_v_.assign(cells, static_cast<double>(env.horizon));
    last_v_check_.assign(cells, 0.0);
  }

  long long observe(const LsviUcbPlusPlus& agent, const DpTables& dp, Rng& rng,
                    MonitorTallies& tallies, double& max_norm_ratio) {
    long long q_violations = 0;
    const int H = env_.horizon, S = env_.num_states, A = env_.num_actions;
    const auto& cfg = agent.config();
    const bool all = settings_.all_states_every_episode || agent.refreshed_this_episode();

    for (int h = 0; h < H; ++h) {
      std::vector<int> states;
      if (all || settings_.sampled_states >= S) {
        for (int s = 0; s < S; ++s) states.push_back(s);
      } else {
        for (int i = 0; i < settings_.sampled_states; ++i)
          states.push_back(std::min(S - 1, static_cast<int>(uniform01(rng) * S)));
      }
      for (int s : states) {
        double v = 0.0, v_check = 0.0;
        for (int a = 0; a < A; ++a) {
          const auto& phi = env_.feature(s, a);
          const double r = env_.reward(h, s, a);
          v = std::max(v, agent.snapshots().optimistic(h, phi, r, H));
          v_check = std::max(v_check, agent.snapshots().pessimistic(h, phi, r, H));
        }
        double& prev = last_v_[idx(h * S + s)];
        double& prev_check = last_v_check_[idx(h * S + s)];
        const bool mono = v <= prev + kMonotoneSlack && v_check >= prev_check - kMonotoneSlack;
        tallies.monotonicity.record(mono);
        const bool ordered = v_check <= v;
        tallies.ordering.record(ordered);
        q_violations += (mono ? 0 : 1) + (ordered ? 0 : 1);
        prev = v;
        prev_check = v_check;
      }
    }

    const double scale = std::sqrt(cfg.d * static_cast<double>(num_episodes_) / cfg.lambda);
    const double bound = H * scale, bound_sq = static_cast<double>(H) * H * scale;
    for (int h = 0; h < H; ++h) {
      const double r1 = agent.w_hat(h).norm() / bound;
      const double r2 = agent.w_check(h).norm() / bound;
      const double r3 = agent.w_tilde(h).norm() / bound_sq;
      tallies.weight_norm.record(r1 <= 1.0);
      tallies.weight_norm.record(r2 <= 1.0);
      tallies.weight_norm.record(r3 <= 1.0);
      max_norm_ratio = std::max({max_norm_ratio, r1, r2, r3});
    }

    if (settings_.check_optimism) {
      for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) {
            const double q_star = dp.q(h, s, a);
            const bool ok = agent.q_optimistic(h, s, a) >= q_star - kOptimismSlack &&
                            q_star >= agent.q_pessimistic(h, s, a) - kOptimismSlack;
            tallies.optimism.record(ok);
            if (!ok) ++q_violations;
          }
    }
    return q_violations;
  }

 private:
  const LinearMdpSpec& env_;
  MonitorSettings settings_;
  int num_episodes_;
  std::vector<double> last_v_;
  std::vector<double> last_v_check_;
};

/// Baseline monitor: records whether Q moved up (expected for LSVI-UCB) and
/// optimism against Q*.
class BaselineMonitor {
 public:
  explicit BaselineMonitor(const LinearMdpSpec& env)
      : env_(env), last_v_(idx(env.horizon * env.num_states), static_cast<double>(env.horizon)) {}

  long long observe(const LsviUcb& agent, const DpTables& dp, const MonitorSettings& settings,
                    MonitorTallies& tallies) {
    long long q_violations = 0;
    const int H = env_.horizon, S = env_.num_states, A = env_.num_actions;
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        double v = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) v = std::max(v, agent.q_optimistic(h, s, a));
        double& prev = last_v_[idx(h * S + s)];
        const bool mono = v <= prev + kMonotoneSlack;
        tallies.monotonicity.record(mono);
        if (!mono) ++q_violations;
        prev = v;
        if (settings.check_optimism)
          for (int a = 0; a < A; ++a) {
            const bool ok = agent.q_optimistic(h, s, a) >= dp.q(h, s, a) - kOptimismSlack;
            tallies.optimism.record(ok);
            if (!ok) ++q_violations;
          }
      }
    return q_violations;
  }

 private:
  const LinearMdpSpec& env_;
  std::vector<double> last_v_;
};

}  // namespace

void RunConfig::validate() const {
  if (num_episodes < 1) throw std::invalid_argument("K must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (monitor.sampled_states < 0) throw std::invalid_argument("sampled_states must be >= 0");
  if (agent.algorithm != "lsvi_ucb_pp" && agent.algorithm != "lsvi_ucb" && agent.algorithm != "random")
    throw std::invalid_argument("unknown algorithm '" + agent.algorithm + "'");
  if (env.generator != "simplex" && env.generator != "tabular" && env.generator != "file")
    throw std::invalid_argument("unknown environment generator '" + env.generator + "'");
}

MonitorTallies& MonitorTallies::operator+=(const MonitorTallies& o) {
  auto add = [](InvariantTally& a, const InvariantTally& b) {
    a.checks += b.checks;
    a.violations += b.violations;
  };
  add(monotonicity, o.monotonicity);
  add(ordering, o.ordering);
  add(weight_norm, o.weight_norm);
  add(sigma_bar_lower, o.sigma_bar_lower);
  add(sigma_bar_upper, o.sigma_bar_upper);
  add(switch_bound, o.switch_bound);
  add(optimism, o.optimism);
  add(regret_nonnegative, o.regret_nonnegative);
  add(monitor_purity, o.monitor_purity);
  return *this;
}

nlohmann::json MonitorTallies::to_json() const {
  auto t = [](const InvariantTally& x) {
    return nlohmann::json{{"checks", x.checks}, {"violations", x.violations}};
  };
  return {{"monotonicity", t(monotonicity)},       {"ordering", t(ordering)},
          {"weight_norm", t(weight_norm)},         {"sigma_bar_lower", t(sigma_bar_lower)},
          {"sigma_bar_upper", t(sigma_bar_upper)}, {"switch_bound", t(switch_bound)},
          {"optimism", t(optimism)},               {"regret_nonnegative", t(regret_nonnegative)},
          {"monitor_purity", t(monitor_purity)}};
}

bool SeedResult::hard_invariants_ok() const {
  const auto& t = tallies;
  bool ok = t.regret_nonnegative.violations == 0 && t.monitor_purity.violations == 0;
  if (algorithm == "lsvi_ucb_pp")
    ok = ok && t.monotonicity.violations == 0 && t.ordering.violations == 0 &&
         t.weight_norm.violations == 0 && t.sigma_bar_lower.violations == 0 &&
         t.sigma_bar_upper.violations == 0 && t.switch_bound.violations == 0;
  return ok;
}

nlohmann::json SeedResult::to_json() const {
  return {{"seed", seed},
          {"algorithm", algorithm},
          {"K", num_episodes()},
          {"final_cum_regret", cum_regret.empty() ? 0.0 : cum_regret.back()},
          {"refresh_count", refresh_episodes.size()},
          {"refresh_episodes", refresh_episodes},
          {"switch_bound", switch_bound},
          {"sigma_bar_min", sigma_bar_min},
          {"sigma_bar_max", sigma_bar_max},
          {"max_weight_norm_ratio", max_weight_norm_ratio},
          {"hard_invariants_ok", hard_invariants_ok()},
          {"tallies", tallies.to_json()}};
}

LinearMdpSpec build_environment(const EnvDescriptor& env, std::uint64_t run_seed) {
  LinearMdpSpec spec;
  if (env.generator == "file") {
    spec = load_spec(env.path);
  } else {
    Rng rng(env.seed + (env.per_seed ? run_seed : 0));
    if (env.generator == "simplex")
      spec = make_random_simplex_mdp(env.d, env.num_states, env.num_actions, env.horizon, rng);
    else if (env.generator == "tabular")
      spec = make_random_tabular_mdp(env.num_states, env.num_actions, env.horizon, rng);
    else
      throw std::invalid_argument("unknown environment generator '" + env.generator + "'");
  }
  const ValidationReport report = validate_spec(spec);
  if (!report.ok()) throw std::invalid_argument("environment is not a valid linear MDP:\n" + report.to_string());
  return spec;
}

std::unique_ptr<EpisodicAgent> build_agent(const RunConfig& config, const LinearMdpSpec& env) {
  const AgentDescriptor& a = config.agent;
  if (a.algorithm == "lsvi_ucb_pp") {
    AgentConfig c;
    c.d = env.d;
    c.horizon = env.horizon;
    c.num_episodes = config.num_episodes;
    c.lambda = a.lambda;
    c.c_beta = a.c_beta;
    c.c_bar = a.c_bar;
    c.c_tilde = a.c_tilde;
    c.sigma_floor_scale = a.sigma_floor_scale;
    c.gap_scale = a.gap_scale;
    c.delta = a.delta;
    const Radii r = theory_radii(c);
    c.beta = r.beta;
    c.beta_bar = r.beta_bar;
    c.beta_tilde = r.beta_tilde;
    return std::make_unique<LsviUcbPlusPlus>(c, env);
  }
  if (a.algorithm == "lsvi_ucb") {
    LsviUcbConfig c;
    c.d = env.d;
    c.horizon = env.horizon;
    c.num_episodes = config.num_episodes;
    c.lambda = a.baseline_lambda;
    c.c_baseline = a.c_baseline;
    c.delta = a.delta;
    c.beta_baseline = LsviUcbConfig::theory_beta(c.d, c.horizon, c.num_episodes, c.delta, c.c_baseline);
    c.update_mode = parse_update_mode(a.update_mode);
    return std::make_unique<LsviUcb>(c, env);
  }
  if (a.algorithm == "random") return std::make_unique<RandomAgent>(env.num_actions);
  throw std::invalid_argument("unknown algorithm '" + a.algorithm + "'");
}

StochasticPolicy episode_policy_snapshot(const EpisodicAgent& agent, const LinearMdpSpec& env) {
  const int H = env.horizon, S = env.num_states, A = env.num_actions;
  StochasticPolicy pi;
  pi.reserve(idx(H * S * A));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      const std::vector<double> p = agent.action_distribution(h, s);
      if (p.size() != idx(A)) throw std::invalid_argument("agent action count does not match env");
      pi.insert(pi.end(), p.begin(), p.end());
    }
  return pi;
}

SeedResult run_seed(const RunConfig& config, std::uint64_t seed, const AgentFactory& factory) {
  config.validate();
  const LinearMdpSpec env = build_environment(config.env, seed);
  const DpTables dp = optimal_values_dp(env);
  const double v_star = dp.v(0, env.initial_state);
  std::unique_ptr<EpisodicAgent> agent = factory(config, env);

  auto* plus = dynamic_cast<LsviUcbPlusPlus*>(agent.get());
  auto* baseline = dynamic_cast<LsviUcb*>(agent.get());
  std::ofstream debug_log;
  if (plus != nullptr && !config.debug_log_dir.empty()) {
    std::filesystem::create_directories(config.debug_log_dir);
    debug_log.open(config.debug_log_dir + "/debug_seed" + std::to_string(seed) + ".jsonl");
    plus->set_debug_log(&debug_log);
  }

  const int K = config.num_episodes, H = env.horizon;
  SeedResult out;
  out.seed = seed;
  out.algorithm = std::string(agent->name());
  if (plus != nullptr) out.switch_bound = switch_bound(env.d, H, K, plus->config().lambda);
  out.sigma_bar_min = std::numeric_limits<double>::infinity();
  out.sigma_bar_max = 0.0;

  Rng rng(seed);
  Rng monitor_rng(seed ^ kMonitorStream);
  std::optional<PlusPlusMonitor> plus_monitor;
  std::optional<BaselineMonitor> baseline_monitor;
  if (plus != nullptr) plus_monitor.emplace(env, config.monitor, K);
  if (baseline != nullptr) baseline_monitor.emplace(env);

  const double d = env.d;
  const double sigma_cap_sq = plus != nullptr
      ? 4.0 * d * d * d * d * std::pow(static_cast<double>(H), 4) / plus->config().lambda
      : 0.0;

  double cum = 0.0;
  for (int k = 1; k <= K; ++k) {
    auto t0 = Clock::now();
    agent->prepare_episode(k);
    out.timing.plan_s += seconds_since(t0);

    t0 = Clock::now();
    const std::vector<double> v_pi = policy_value_dp(env, episode_policy_snapshot(*agent, env));
    const double regret = v_star - v_pi[idx(env.initial_state)];
    out.timing.regret_s += seconds_since(t0);
    out.tallies.regret_nonnegative.record(regret >= -kRegretSlack);

    t0 = Clock::now();
    const std::uint64_t before = agent->state_hash();
    long long q_violations = 0;
    if (plus != nullptr)
      q_violations = plus_monitor->observe(*plus, dp, monitor_rng, out.tallies, out.max_weight_norm_ratio);
    else if (baseline != nullptr)
      q_violations = baseline_monitor->observe(*baseline, dp, config.monitor, out.tallies);
    out.tallies.monitor_purity.record(agent->state_hash() == before);
    out.timing.monitor_s += seconds_since(t0);

    t0 = Clock::now();
    const EpisodeRecord rec = agent->rollout(env, rng);
    out.timing.rollout_s += seconds_since(t0);

    double sigma_sum = 0.0;
    for (const VarianceParts& vp : rec.variance) {
      sigma_sum += vp.sigma_bar;
      out.sigma_bar_min = std::min(out.sigma_bar_min, vp.sigma_bar);
      out.sigma_bar_max = std::max(out.sigma_bar_max, vp.sigma_bar);
      out.tallies.sigma_bar_lower.record(vp.sigma_bar >= static_cast<double>(H));
      out.tallies.sigma_bar_upper.record(vp.sigma_bar * vp.sigma_bar <= sigma_cap_sq);
    }

    cum += regret;
    out.episodic_regret.push_back(regret);
    out.cum_regret.push_back(cum);
    out.refreshed.push_back(agent->refreshed_this_episode() ? 1 : 0);
    if (agent->refreshed_this_episode()) out.refresh_episodes.push_back(k);
    out.refresh_total.push_back(agent->refresh_count());
    out.sigma_bar_mean.push_back(rec.variance.empty() ? 0.0 : sigma_sum / rec.variance.size());
    out.q_violations.push_back(q_violations);
  }
  if (plus != nullptr) out.tallies.switch_bound.record(plus->refresh_count() <= out.switch_bound);
  if (out.sigma_bar_min == std::numeric_limits<double>::infinity()) out.sigma_bar_min = 0.0;
  return out;
}

std::vector<SeedResult> run_experiment(const RunConfig& config, const AgentFactory& factory) {
  config.validate();
  std::vector<SeedResult> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        results[i] = run_seed(config, config.seeds[i], factory);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), config.seeds.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

SeedSummary aggregate_seeds(const std::vector<SeedResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate_seeds needs at least one result");
  const int K = results.front().num_episodes();
  for (const auto& r : results)
    if (r.num_episodes() != K || r.episodic_regret.size() != idx(K))
      throw std::invalid_argument("aggregate_seeds: results have different K");

  SeedSummary s;
  s.num_episodes = K;
  s.num_seeds = static_cast<int>(results.size());
  const double n = s.num_seeds;
  auto mean_stderr = [&](auto member, std::vector<double>& mean, std::vector<double>& se) {
    mean.assign(idx(K), 0.0);
    se.assign(idx(K), 0.0);
    for (int k = 0; k < K; ++k) {
      double sum = 0.0;
      for (const auto& r : results) sum += (r.*member)[idx(k)];
      const double m = sum / n;
      double ss = 0.0;
      for (const auto& r : results) {
        const double dev = (r.*member)[idx(k)] - m;
        ss += dev * dev;
      }
      mean[idx(k)] = m;
      se[idx(k)] = results.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    }
  };
  mean_stderr(&SeedResult::cum_regret, s.mean_cum_regret, s.stderr_cum_regret);
  mean_stderr(&SeedResult::episodic_regret, s.mean_episodic_regret, s.stderr_episodic_regret);
  for (const auto& r : results) {
    s.switch_counts.push_back(static_cast<int>(r.refresh_episodes.size()));
    s.totals += r.tallies;
  }
  return s;
}

nlohmann::json SeedSummary::to_json() const {
  return {{"K", num_episodes},
          {"num_seeds", num_seeds},
          {"mean_cum_regret", mean_cum_regret},
          {"stderr_cum_regret", stderr_cum_regret},
          {"mean_episodic_regret", mean_episodic_regret},
          {"stderr_episodic_regret", stderr_episodic_regret},
          {"switch_counts", switch_counts},
          {"invariant_totals", totals.to_json()}};
}

std::string seed_csv(const SeedResult& r) {
  std::string out = "k,episodic_regret,cum_regret,refreshed,refresh_total,sigma_bar_mean,q_violations\n";
  for (int k = 0; k < r.num_episodes(); ++k) {
    const auto i = idx(k);
    out += std::to_string(k + 1) + ',' + g17(r.episodic_regret[i]) + ',' + g17(r.cum_regret[i]) + ',' +
           std::to_string(r.refreshed[i]) + ',' + std::to_string(r.refresh_total[i]) + ',' +
           g17(r.sigma_bar_mean[i]) + ',' + std::to_string(r.q_violations[i]) + '\n';
  }
  return out;
}

}  // namespace lsvi
