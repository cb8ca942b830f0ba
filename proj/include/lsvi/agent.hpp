#pragma once

#include <cstdint>
#include <ostream>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lsvi/envs.hpp"
#include "lsvi/episode.hpp"
#include "lsvi/regress.hpp"

namespace lsvi {

/// Theory mode uses the confidence radii at full scale; practical mode scales
/// them down so that learning is visible at small K.
enum class Mode { kTheory, kPractical };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view text);

struct Radii {
  double beta = 0.0;
  double beta_bar = 0.0;
  double beta_tilde = 0.0;
};

struct AgentConfig {
  int d = 1;
  int horizon = 1;
  int num_episodes = 1;  // K, enters the radii
  double lambda = 1.0;
  double beta = 0.0;
  double beta_bar = 0.0;
  double beta_tilde = 0.0;
  double c_beta = 1.0;
  double c_bar = 1.0;
  double c_tilde = 1.0;
  double sigma_floor_scale = 1.0;
  double gap_scale = 1.0;  // multiplier on the D (sub-optimality gap) term
  double delta = 0.01;

  /// lambda = 1/H^2, mode multipliers, radii from theory_radii().
  static AgentConfig make(int d, int horizon, int num_episodes, Mode mode);
  void validate() const;
};

/// Confidence radii:
///   beta       = c_beta  * (H sqrt(d lambda)   + sqrt(d log^2(1 + dKH/(delta lambda))))
///   beta_bar   = c_bar   * (H sqrt(d lambda)   + sqrt(d^3 H^2 log^2(dHK/(delta lambda))))
///   beta_tilde = c_tilde * (H^2 sqrt(d lambda) + sqrt(d^3 H^4 log^2(dHK/(delta lambda))))
Radii theory_radii(const AgentConfig& config);

/// Upper bound dH log2(1 + K/lambda) on the number of value refreshes.
double switch_bound(int d, int horizon, int num_episodes, double lambda);

/// One stored value-function epoch at a single stage.
struct Epoch {
  int k = 0;
  Eigen::VectorXd w_hat;
  Eigen::VectorXd w_check;
  Eigen::MatrixXd precision_inv;
  double beta = 0.0;
  double beta_bar = 0.0;
};

/// Per-stage epoch lists. Values are the running min (optimistic) or max
/// (pessimistic) over all epochs, with an implicit epoch 0 giving Q = H and
/// Q_check = 0. Results are clipped into [0, H].
class ValueSnapshotList {
 public:
  explicit ValueSnapshotList(int horizon) : epochs_(static_cast<std::size_t>(horizon)) {}

  void append(int h, Epoch epoch) { epochs_.at(static_cast<std::size_t>(h)).push_back(std::move(epoch)); }
  const std::vector<Epoch>& epochs(int h) const { return epochs_.at(static_cast<std::size_t>(h)); }
  int horizon() const { return static_cast<int>(epochs_.size()); }

  double optimistic(int h, const Eigen::VectorXd& phi, double reward, double cap) const;
  double pessimistic(int h, const Eigen::VectorXd& phi, double reward, double cap) const;

 private:
  std::vector<std::vector<Epoch>> epochs_;
};

struct TranscriptEntry {
  Eigen::VectorXd phi;
  int next_state = 0;
  double sigma_bar = 1.0;
  int k = 0;
};

/// Variance-weighted, rare-switching optimistic least-squares value iteration
/// (LSVI-UCB++).
///
/// The agent knows the feature map and the rewards of its environment but
/// never reads the transition measures. Stages are 0-based; value tables carry
/// a terminal stage H with V = 0.
class LsviUcbPlusPlus final : public EpisodicAgent {
 public:
  LsviUcbPlusPlus(AgentConfig config, const LinearMdpSpec& model);

  std::string_view name() const override { return "lsvi_ucb_pp"; }

  void prepare_episode(int k) override { backward_pass(k); }
  EpisodeRecord rollout(const LinearMdpSpec& env, Rng& rng) override;
  std::vector<double> action_distribution(int h, int s) const override;
  int refresh_count() const override { return static_cast<int>(refresh_episodes_.size()); }
  bool refreshed_this_episode() const override { return refreshed_; }
  std::uint64_t state_hash() const override;

  /// Planning step for episode k (1-based). Returns true iff the value
  /// functions were refreshed.
  bool backward_pass(int k);

  double q_optimistic(int h, int s, int a) const;
  double q_pessimistic(int h, int s, int a) const;
  double v_optimistic(int h, int s) const;
  double v_pessimistic(int h, int s) const;
  int select_action(int h, int s) const;

  VarianceParts estimate_variance(int h, const Eigen::VectorXd& phi) const;

  /// Ingest (s, a, s_next) at stage h of the current episode. Stages must be
  /// observed in order 0..H-1.
  VarianceParts observe_transition(int h, int s, int a, int s_next);

  /// Dense from-scratch solve of the regression at stage h over the whole
  /// transcript, using the current value tables as targets.
  Eigen::VectorXd weights_from_scratch(int h, Target target) const;

  const AgentConfig& config() const { return config_; }
  const RegressionState& regression(int h) const { return regs_.at(static_cast<std::size_t>(h)); }
  const ValueSnapshotList& snapshots() const { return snapshots_; }
  const std::vector<TranscriptEntry>& transcript(int h) const {
    return transcript_.at(static_cast<std::size_t>(h));
  }
  const Eigen::VectorXd& w_hat(int h) const { return w_hat_.at(static_cast<std::size_t>(h)); }
  const Eigen::VectorXd& w_check(int h) const { return w_check_.at(static_cast<std::size_t>(h)); }
  const Eigen::VectorXd& w_tilde(int h) const { return w_tilde_.at(static_cast<std::size_t>(h)); }
  const std::vector<int>& refresh_episodes() const { return refresh_episodes_; }
  int current_episode() const { return episode_; }
  const Eigen::VectorXd& feature(int s, int a) const { return features_[idx(s * num_actions_ + a)]; }
  double reward(int h, int s, int a) const { return rewards_[idx((h * num_states_ + s) * num_actions_ + a)]; }

  /// Optional JSON-lines sink: {k, h, sigma, sigma_bar, bonus, refresh}.
  void set_debug_log(std::ostream* sink) { debug_log_ = sink; }

 private:
  static std::size_t idx(int i) { return static_cast<std::size_t>(i); }
  std::size_t sa(int h, int s, int a) const { return idx((h * num_states_ + s) * num_actions_ + a); }
  RegressionTargets targets_for(int h, int s_next) const;
  void refresh_stage(int h, int k);
  void solve_stage(int h);

  AgentConfig config_;
  int num_states_;
  int num_actions_;
  std::vector<Eigen::VectorXd> features_;
  std::vector<double> rewards_;

  std::vector<RegressionState> regs_;
  std::vector<double> snapshot_log_det_;
  ValueSnapshotList snapshots_;
  std::vector<std::vector<TranscriptEntry>> transcript_;
  std::vector<Eigen::VectorXd> w_hat_, w_check_, w_tilde_;

  // Cached Q/V tables; they equal the snapshot-list evaluation.
  std::vector<double> q_opt_, q_pess_;
  std::vector<double> v_opt_, v_pess_;

  std::vector<int> refresh_episodes_;
  int episode_ = 0;
  int next_stage_ = 0;
  bool refreshed_ = false;
  std::ostream* debug_log_ = nullptr;
};

}  // namespace lsvi
