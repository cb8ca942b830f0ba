#include "lsvi/selftest.hpp"

#include <cmath>
#include <string>

#include "lsvi/agent.hpp"
#include "lsvi/harness.hpp"
#include "lsvi/regress.hpp"

namespace lsvi {

namespace {

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Incremental regression against a dense rebuild on random sequences.
bool regression_matches_dense(std::ostream& log) {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(uniform01(rng) * 8);
    const double lambda = 0.05 + uniform01(rng);
    RegressionState reg(d, lambda);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d) * lambda;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (int t = 0; t < 300; ++t) {
      Eigen::VectorXd phi(d);
      for (int i = 0; i < d; ++i) phi[i] = 2.0 * uniform01(rng) - 1.0;
      phi /= std::max(1.0, phi.norm());
      const double w = 1e-4 + (1.0 - 1e-4) * uniform01(rng);
      const double y = uniform01(rng);
      reg.rank_one_update(phi, w, {y, 0.0, 0.0});
      gram += w * phi * phi.transpose();
      rhs += w * y * phi;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    worst = std::max({worst, rel_err(reg.precision_inv(), llt.solve(Eigen::MatrixXd::Identity(d, d))),
                      rel_err(reg.solve_weights(Target::kOptimistic), llt.solve(rhs)),
                      std::abs(reg.log_det() - log_det) / std::max(1.0, std::abs(log_det))});
  }
  log << "  worst relative error " << worst << '\n';
  return worst <= 1e-8;
}

}  // namespace

int run_selftest(std::ostream& log) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    log << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  check("regression incremental == dense", regression_matches_dense(log));

  RunConfig config;
  config.env = EnvDescriptor{"simplex", 3, 4, 2, 2, 11, true, ""};
  config.agent.mode = Mode::kPractical;
  config.agent.lambda = 0.25;
  config.num_episodes = 300;
  config.seeds = {1, 2};
  config.monitor.all_states_every_episode = true;

  double worst_rebuild = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const LinearMdpSpec env = build_environment(config.env, seed);
    auto agent_ptr = build_agent(config, env);
    auto& agent = dynamic_cast<LsviUcbPlusPlus&>(*agent_ptr);
    Rng rng(seed);
    for (int k = 1; k <= config.num_episodes; ++k) {
      agent.prepare_episode(k);
      for (int h = 0; h < env.horizon; ++h)
        for (Target t : {Target::kOptimistic, Target::kPessimistic, Target::kSquared}) {
          const Eigen::VectorXd dense = agent.weights_from_scratch(h, t);
          const Eigen::VectorXd& inc = t == Target::kOptimistic    ? agent.w_hat(h)
                                       : t == Target::kPessimistic ? agent.w_check(h)
                                                                   : agent.w_tilde(h);
          worst_rebuild = std::max(worst_rebuild, (inc - dense).norm() / std::max(1.0, dense.norm()));
        }
      agent.rollout(env, rng);
    }
  }
  log << "  worst incremental-vs-rebuild error " << worst_rebuild << '\n';
  check("incremental weights == transcript rebuild", worst_rebuild <= 1e-8);

  const std::vector<SeedResult> results = run_experiment(config);
  for (const SeedResult& r : results) {
    const std::string tag = " (seed " + std::to_string(r.seed) + ")";
    log << "  refreshes " << r.refresh_episodes.size() << " <= bound " << r.switch_bound << '\n';
    check("switch bound" + tag, r.tallies.switch_bound.violations == 0);
    check("weight-norm bounds" + tag, r.tallies.weight_norm.violations == 0);
    check("monotone value estimates" + tag, r.tallies.monotonicity.violations == 0);
    check("pessimistic <= optimistic" + tag, r.tallies.ordering.violations == 0);
    check("sigma_bar bounds" + tag,
          r.tallies.sigma_bar_lower.violations == 0 && r.tallies.sigma_bar_upper.violations == 0);
    check("monitors leave agent untouched" + tag, r.tallies.monitor_purity.violations == 0);
    check("episodic regret >= 0" + tag, r.tallies.regret_nonnegative.violations == 0);
  }
  return failures;
}

}  // namespace lsvi
