#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lsvi/baselines.hpp"
#include "lsvi/envs.hpp"
#include "lsvi/harness.hpp"

using namespace lsvi;

namespace {

LinearMdpSpec two_arm_bandit() {
  TabularMdp m;
  m.num_states = 1;
  m.num_actions = 2;
  m.horizon = 1;
  m.transitions = {1.0, 1.0};
  m.rewards = {0.0, 1.0};
  return make_tabular_embedding(m);
}

}  // namespace

TEST_CASE("LsviUcbConfig") {
  const double beta = LsviUcbConfig::theory_beta(4, 3, 1000, 0.01, 1.0);
  CHECK(beta == doctest::Approx(12.0 * std::sqrt(std::log(2.0 * 4 * 1000 * 3 / 0.01))));
  const LsviUcbConfig p = LsviUcbConfig::make(4, 3, 1000, Mode::kPractical);
  CHECK(p.c_baseline == 0.02);
  CHECK(p.beta_baseline == doctest::Approx(0.02 * beta));
  CHECK(LsviUcbConfig::make(4, 3, 1000, Mode::kTheory).beta_baseline == doctest::Approx(beta));
  LsviUcbConfig bad = p;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_update_mode("rare_switching") == UpdateMode::kRareSwitching);
  CHECK(update_mode_name(UpdateMode::kEveryEpisode) == "every_episode");
  CHECK_THROWS_AS(parse_update_mode("sometimes"), std::invalid_argument);
}

TEST_CASE("LSVI-UCB: empty-data Q and tie-break") {
  Rng g(1);
  LinearMdpSpec env = make_random_simplex_mdp(3, 4, 2, 2, g);
  std::fill(env.rewards.begin(), env.rewards.end(), 0.0);
  LsviUcbConfig c = LsviUcbConfig::make(3, 2, 10, Mode::kTheory);
  c.beta_baseline = 0.3;
  LsviUcb agent(c, env);
  agent.prepare_episode(1);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < 2; ++a)
        CHECK(agent.q_optimistic(h, s, a) ==
              doctest::Approx(std::min(0.3 * env.feature(s, a).norm() / std::sqrt(c.lambda), 2.0)));
    }
}

TEST_CASE("LSVI-UCB: zero bonus is greedy on regressed values") {
  const LinearMdpSpec env = two_arm_bandit();
  LsviUcbConfig c = LsviUcbConfig::make(2, 1, 10, Mode::kPractical);
  c.beta_baseline = 0.0;
  LsviUcb agent(c, env);
  Rng rng(1);
  agent.run_episode(env, 1, rng);
  CHECK(agent.select_action(0, 0) == 1);  // r = (0, 1), regressed next value 0
  CHECK(agent.q_optimistic(0, 0, 0) == 0.0);
  CHECK(agent.q_optimistic(0, 0, 1) == 1.0);
}

TEST_CASE("LSVI-UCB: seeded run has positive finite regret and Q may move up") {
  RunConfig config;
  config.env.d = 4;
  config.env.num_states = 6;
  config.env.num_actions = 3;
  config.env.horizon = 3;
  config.agent.algorithm = "lsvi_ucb";
  config.num_episodes = 2000;
  config.seeds = {3};
  const SeedResult r = run_seed(config, 3);
  CHECK(r.cum_regret.back() > 0.0);
  CHECK(std::isfinite(r.cum_regret.back()));
  CHECK(r.tallies.regret_nonnegative.violations == 0);
  CHECK(r.hard_invariants_ok());
}

TEST_CASE("LSVI-UCB: rare switching replans at k = 1 and on doubling only") {
  Rng g(2);
  const LinearMdpSpec env = make_random_simplex_mdp(3, 4, 2, 2, g);
  LsviUcbConfig c = LsviUcbConfig::make(3, 2, 500, Mode::kPractical);
  c.update_mode = UpdateMode::kRareSwitching;
  LsviUcb agent(c, env);
  Rng rng(3);
  agent.run_episode(env, 1, rng);
  CHECK(agent.refreshed_this_episode());
  for (int k = 2; k <= 500; ++k) agent.run_episode(env, k, rng);
  CHECK(agent.refresh_count() < 100);
  CHECK(agent.refresh_count() <= 1 + switch_bound(3, 2, 500, c.lambda));

  LsviUcbConfig e = c;
  e.update_mode = UpdateMode::kEveryEpisode;
  LsviUcb every(e, env);
  for (int k = 1; k <= 20; ++k) every.run_episode(env, k, rng);
  CHECK(every.refresh_count() == 20);
}

TEST_CASE("LSVI-UCB: theory-scale optimism on a tabular embedding") {
  Rng g(4);
  const LinearMdpSpec env = make_random_tabular_mdp(2, 2, 2, g);
  const DpTables star = optimal_values_dp(env);
  LsviUcb agent(LsviUcbConfig::make(env.d, 2, 200, Mode::kTheory), env);
  Rng rng(5);
  long long checks = 0, violations = 0;
  for (int k = 1; k <= 200; ++k) {
    agent.prepare_episode(k);
    for (int h = 0; h < 2; ++h)
      for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
          ++checks;
          if (agent.q_optimistic(h, s, a) < star.q(h, s, a) - 1e-9) ++violations;
        }
    agent.rollout(env, rng);
  }
  CHECK(checks == 1600);
  CHECK(violations == 0);
}

TEST_CASE("random agent") {
  RandomAgent agent(3);
  CHECK(agent.action_distribution(0, 0) == std::vector<double>(3, 1.0 / 3.0));
  CHECK_THROWS_AS(RandomAgent(0), std::invalid_argument);

  Rng g(6);
  const LinearMdpSpec env = make_random_simplex_mdp(3, 4, 3, 3, g);
  RandomAgent a(3), b(3);
  Rng ra(9), rb(9);
  for (int k = 1; k <= 50; ++k) {
    const EpisodeRecord x = a.run_episode(env, k, ra);
    const EpisodeRecord y = b.run_episode(env, k, rb);
    CHECK(x.actions == y.actions);
    CHECK(x.states == y.states);
  }

  SUBCASE("single-action environment has zero regret") {
    Rng g2(7);
    const LinearMdpSpec one = make_random_tabular_mdp(3, 1, 2, g2);
    const DpTables star = optimal_values_dp(one);
    RandomAgent r(1);
    r.prepare_episode(1);
    StochasticPolicy pi(static_cast<std::size_t>(2 * 3), 1.0);
    CHECK(policy_value_dp(one, pi)[0] == doctest::Approx(star.v(0, 0)));
  }

  SUBCASE("H = 1 two-armed {0, 1} rewards: empirical mean regret near 0.5") {
    const LinearMdpSpec bandit = two_arm_bandit();
    RandomAgent r(2);
    Rng rng(11);
    const int N = 20000;
    double regret = 0.0;
    for (int k = 1; k <= N; ++k) regret += 1.0 - r.run_episode(bandit, k, rng).rewards[0];
    CHECK(std::abs(regret / N - 0.5) < 3.0 * std::sqrt(0.25 / N));
  }
}
