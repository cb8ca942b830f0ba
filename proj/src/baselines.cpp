#include "lsvi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lsvi {

std::string_view update_mode_name(UpdateMode mode) {
  return mode == UpdateMode::kEveryEpisode ? "every_episode" : "rare_switching";
}

UpdateMode parse_update_mode(std::string_view text) {
  if (text == "every_episode") return UpdateMode::kEveryEpisode;
  if (text == "rare_switching") return UpdateMode::kRareSwitching;
  throw std::invalid_argument("unknown update mode '" + std::string(text) +
                              "' (expected every_episode|rare_switching)");
}

double LsviUcbConfig::theory_beta(int d, int horizon, int num_episodes, double delta, double c) {
  return c * d * horizon * std::sqrt(std::log(2.0 * d * num_episodes * horizon / delta));
}

LsviUcbConfig LsviUcbConfig::make(int d, int horizon, int num_episodes, Mode mode) {
  LsviUcbConfig c;
  c.d = d;
  c.horizon = horizon;
  c.num_episodes = num_episodes;
  c.c_baseline = mode == Mode::kPractical ? 0.02 : 1.0;
  c.beta_baseline = theory_beta(d, horizon, num_episodes, c.delta, c.c_baseline);
  return c;
}

void LsviUcbConfig::validate() const {
  if (d < 1 || horizon < 1 || num_episodes < 1)
    throw std::invalid_argument("baseline dimensions d, H, K must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("baseline lambda must be positive");
  if (!(beta_baseline >= 0.0)) throw std::invalid_argument("beta_baseline must be >= 0");
}

LsviUcb::LsviUcb(LsviUcbConfig config, const LinearMdpSpec& model)
    : config_(config),
      num_states_(model.num_states),
      num_actions_(model.num_actions),
      features_(model.features),
      rewards_(model.rewards) {
  config_.validate();
  check_shapes(model);
  if (model.d != config_.d || model.horizon != config_.horizon)
    throw std::invalid_argument("baseline (d, H) does not match the model");
  const auto H = static_cast<std::size_t>(config_.horizon);
  for (std::size_t h = 0; h < H; ++h) regs_.emplace_back(config_.d, config_.lambda);
  snapshot_log_det_.assign(H, regs_.front().log_det());
  transcript_.resize(H);
  w_hat_.assign(H, Eigen::VectorXd::Zero(config_.d));
  q_.assign(H * static_cast<std::size_t>(num_states_ * num_actions_), 0.0);
  v_.assign((H + 1) * static_cast<std::size_t>(num_states_), 0.0);
}

void LsviUcb::replan() {
  const int H = config_.horizon, S = num_states_, A = num_actions_;
  for (int h = H - 1; h >= 0; --h) {
    RegressionState& reg = regs_[static_cast<std::size_t>(h)];
    reg.reset_rhs();
    for (const auto& [j, next] : transcript_[static_cast<std::size_t>(h)])
      reg.accumulate_rhs(features_[static_cast<std::size_t>(j)], 1.0,
                         {v_[static_cast<std::size_t>((h + 1) * S + next)], 0.0, 0.0});
    const Eigen::VectorXd w = reg.solve_weights(Target::kOptimistic);
    w_hat_[static_cast<std::size_t>(h)] = w;
    for (int s = 0; s < S; ++s) {
      double v = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd& phi = features_[static_cast<std::size_t>(s * A + a)];
        const double q = std::min(rewards_[sa(h, s, a)] + w.dot(phi) +
                                      config_.beta_baseline * reg.bonus(phi),
                                  static_cast<double>(H));
        q_[sa(h, s, a)] = q;
        v = std::max(v, q);
      }
      v_[static_cast<std::size_t>(h * S + s)] = v;
    }
  }
}

void LsviUcb::prepare_episode(int k) {
  if (k <= 0) throw std::invalid_argument("episode index must be >= 1");
  if (k != episode_ + 1) throw std::logic_error("episodes must be prepared in order");
  bool refresh = true;
  if (config_.update_mode == UpdateMode::kRareSwitching) {
    refresh = k == 1;
    for (std::size_t h = 0; h < regs_.size(); ++h)
      if (regs_[h].det_doubled(snapshot_log_det_[h])) refresh = true;
  }
  if (refresh) {
    replan();
    for (std::size_t h = 0; h < regs_.size(); ++h) snapshot_log_det_[h] = regs_[h].log_det();
    ++refreshes_;
  }
  refreshed_ = refresh;
  episode_ = k;
}

int LsviUcb::select_action(int h, int s) const {
  int best = 0;
  for (int a = 1; a < num_actions_; ++a)
    if (q_optimistic(h, s, a) > q_optimistic(h, s, best)) best = a;
  return best;
}

std::vector<double> LsviUcb::action_distribution(int h, int s) const {
  std::vector<double> p(static_cast<std::size_t>(num_actions_), 0.0);
  p[static_cast<std::size_t>(select_action(h, s))] = 1.0;
  return p;
}

EpisodeRecord LsviUcb::rollout(const LinearMdpSpec& env, Rng& rng) {
  if (env.d != config_.d || env.horizon != config_.horizon || env.num_states != num_states_ ||
      env.num_actions != num_actions_)
    throw std::invalid_argument("environment dimensions do not match the agent");
  if (episode_ == 0) throw std::logic_error("rollout before prepare_episode");
  EpisodeRecord rec;
  rec.k = episode_;
  rec.refreshed = refreshed_;
  int s = env.initial_state;
  rec.states.push_back(s);
  for (int h = 0; h < config_.horizon; ++h) {
    const int a = select_action(h, s);
    const int next = sample_next_state(env, h, s, a, rng);
    const int j = s * num_actions_ + a;
    regs_[static_cast<std::size_t>(h)].rank_one_update(features_[static_cast<std::size_t>(j)], 1.0, {});
    transcript_[static_cast<std::size_t>(h)].emplace_back(j, next);
    rec.actions.push_back(a);
    rec.rewards.push_back(env.reward(h, s, a));
    rec.states.push_back(next);
    s = next;
  }
  return rec;
}

std::uint64_t LsviUcb::state_hash() const {
  StateHasher hasher;
  for (const auto& reg : regs_) {
    hasher.add(reg.precision_inv().data(), static_cast<std::size_t>(reg.precision_inv().size()));
    hasher.add(reg.log_det());
  }
  hasher.add(q_.data(), q_.size());
  for (const auto& stage : transcript_) hasher.add(stage.size());
  hasher.add(episode_);
  hasher.add(refreshes_);
  return hasher.value();
}

RandomAgent::RandomAgent(int num_actions) : num_actions_(num_actions) {
  if (num_actions < 1) throw std::invalid_argument("random agent needs at least one action");
}

void RandomAgent::prepare_episode(int k) {
  if (k <= 0) throw std::invalid_argument("episode index must be >= 1");
  episode_ = k;
}

std::vector<double> RandomAgent::action_distribution(int, int) const {
  return std::vector<double>(static_cast<std::size_t>(num_actions_), 1.0 / num_actions_);
}

EpisodeRecord RandomAgent::rollout(const LinearMdpSpec& env, Rng& rng) {
  if (env.num_actions != num_actions_)
    throw std::invalid_argument("environment action count does not match the agent");
  EpisodeRecord rec;
  rec.k = episode_;
  int s = env.initial_state;
  rec.states.push_back(s);
  for (int h = 0; h < env.horizon; ++h) {
    const int a = std::min(num_actions_ - 1, static_cast<int>(uniform01(rng) * num_actions_));
    const int next = sample_next_state(env, h, s, a, rng);
    rec.actions.push_back(a);
    rec.rewards.push_back(env.reward(h, s, a));
    rec.states.push_back(next);
    s = next;
  }
  return rec;
}

std::uint64_t RandomAgent::state_hash() const {
  StateHasher hasher;
  hasher.add(episode_);
  return hasher.value();
}

}  // namespace lsvi
