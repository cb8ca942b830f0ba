#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lsvi/agent.hpp"
#include "lsvi/envs.hpp"
#include "lsvi/episode.hpp"
#include "lsvi/regress.hpp"

namespace lsvi {

enum class UpdateMode { kEveryEpisode, kRareSwitching };

std::string_view update_mode_name(UpdateMode mode);
UpdateMode parse_update_mode(std::string_view text);

struct LsviUcbConfig {
  int d = 1;
  int horizon = 1;
  int num_episodes = 1;
  double lambda = 1.0;
  double c_baseline = 1.0;
  double delta = 0.01;
  double beta_baseline = 0.0;
  UpdateMode update_mode = UpdateMode::kEveryEpisode;

  /// beta_baseline = c * d * H * sqrt(log(2 d K H / delta)), c = 0.02 in
  /// practical mode and 1 in theory mode.
  static LsviUcbConfig make(int d, int horizon, int num_episodes, Mode mode);
  static double theory_beta(int d, int horizon, int num_episodes, double delta, double c);
  void validate() const;
};

/// Hoeffding-bonus LSVI-UCB with unweighted ridge regression. Q is recomputed
/// from scratch at every planning step (no running minimum), so it may move in
/// either direction between episodes.
class LsviUcb final : public EpisodicAgent {
 public:
  LsviUcb(LsviUcbConfig config, const LinearMdpSpec& model);

  std::string_view name() const override { return "lsvi_ucb"; }
  void prepare_episode(int k) override;
  EpisodeRecord rollout(const LinearMdpSpec& env, Rng& rng) override;
  std::vector<double> action_distribution(int h, int s) const override;
  int refresh_count() const override { return refreshes_; }
  bool refreshed_this_episode() const override { return refreshed_; }
  std::uint64_t state_hash() const override;

  double q_optimistic(int h, int s, int a) const { return q_.at(sa(h, s, a)); }
  int select_action(int h, int s) const;
  const Eigen::VectorXd& w_hat(int h) const { return w_hat_.at(static_cast<std::size_t>(h)); }
  const LsviUcbConfig& config() const { return config_; }

 private:
  std::size_t sa(int h, int s, int a) const {
    return static_cast<std::size_t>((h * num_states_ + s) * num_actions_ + a);
  }
  void replan();

  LsviUcbConfig config_;
  int num_states_;
  int num_actions_;
  std::vector<Eigen::VectorXd> features_;
  std::vector<double> rewards_;
  std::vector<RegressionState> regs_;
  std::vector<double> snapshot_log_det_;
  std::vector<std::vector<std::pair<int, int>>> transcript_;  // (feature index, next state)
  std::vector<Eigen::VectorXd> w_hat_;
  std::vector<double> q_;
  std::vector<double> v_;
  int episode_ = 0;
  int refreshes_ = 0;
  bool refreshed_ = false;
};

/// Uniformly random actions; a regret ceiling for comparison curves.
class RandomAgent final : public EpisodicAgent {
 public:
  explicit RandomAgent(int num_actions);

  std::string_view name() const override { return "random"; }
  void prepare_episode(int k) override;
  EpisodeRecord rollout(const LinearMdpSpec& env, Rng& rng) override;
  std::vector<double> action_distribution(int h, int s) const override;
  std::uint64_t state_hash() const override;

 private:
  int num_actions_;
  int episode_ = 0;
};

}  // namespace lsvi
