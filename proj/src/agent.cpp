#include "lsvi/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace lsvi {

std::string_view mode_name(Mode mode) {
  return mode == Mode::kTheory ? "theory" : "practical";
}

Mode parse_mode(std::string_view text) {
  if (text == "theory") return Mode::kTheory;
  if (text == "practical") return Mode::kPractical;
  throw std::invalid_argument("unknown mode '" + std::string(text) +
                              "' (expected theory|practical)");
}

AgentConfig AgentConfig::make(int d, int horizon, int num_episodes, Mode mode) {
  AgentConfig c;
  c.d = d;
  c.horizon = horizon;
  c.num_episodes = num_episodes;
  c.lambda = 1.0 / (static_cast<double>(horizon) * horizon);
  if (mode == Mode::kPractical) {
    c.c_beta = c.c_bar = c.c_tilde = 0.02;
    c.sigma_floor_scale = 0.001;
    c.gap_scale = 0.001;
  }
  const Radii r = theory_radii(c);
  c.beta = r.beta;
  c.beta_bar = r.beta_bar;
  c.beta_tilde = r.beta_tilde;
  return c;
}

void AgentConfig::validate() const {
  if (d < 1 || horizon < 1 || num_episodes < 1)
    throw std::invalid_argument("agent dimensions d, H, K must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("agent lambda must be positive");
  if (!(beta >= 0.0 && beta_bar >= 0.0 && beta_tilde >= 0.0))
    throw std::invalid_argument("confidence radii must be nonnegative");
  if (!(sigma_floor_scale >= 0.0)) throw std::invalid_argument("sigma_floor_scale must be >= 0");
  if (!(gap_scale >= 0.0)) throw std::invalid_argument("gap_scale must be >= 0");
}

Radii theory_radii(const AgentConfig& c) {
  const double d = c.d, H = c.horizon, K = c.num_episodes, lam = c.lambda, delta = c.delta;
  const double ridge = H * std::sqrt(d * lam);
  const double log_beta = std::log(1.0 + d * K * H / (delta * lam));
  const double log_bar = std::log(d * H * K / (delta * lam));
  Radii r;
  r.beta = c.c_beta * (ridge + std::sqrt(d * log_beta * log_beta));
  r.beta_bar = c.c_bar * (ridge + std::sqrt(d * d * d * H * H * log_bar * log_bar));
  r.beta_tilde = c.c_tilde * (H * ridge + std::sqrt(d * d * d * H * H * H * H * log_bar * log_bar));
  return r;
}

double switch_bound(int d, int horizon, int num_episodes, double lambda) {
  return static_cast<double>(d) * horizon * std::log2(1.0 + num_episodes / lambda);
}

double ValueSnapshotList::optimistic(int h, const Eigen::VectorXd& phi, double reward,
                                     double cap) const {
  double q = cap;
  for (const Epoch& e : epochs(h)) {
    const double width = std::sqrt(std::max(0.0, phi.dot(e.precision_inv * phi)));
    q = std::min(q, reward + e.w_hat.dot(phi) + e.beta * width);
  }
  return std::max(q, 0.0);
}

double ValueSnapshotList::pessimistic(int h, const Eigen::VectorXd& phi, double reward,
                                      double cap) const {
  double q = 0.0;
  for (const Epoch& e : epochs(h)) {
    const double width = std::sqrt(std::max(0.0, phi.dot(e.precision_inv * phi)));
    q = std::max(q, reward + e.w_check.dot(phi) - e.beta_bar * width);
  }
  return std::min(q, cap);
}

LsviUcbPlusPlus::LsviUcbPlusPlus(AgentConfig config, const LinearMdpSpec& model)
    : config_(config),
      num_states_(model.num_states),
      num_actions_(model.num_actions),
      features_(model.features),
      rewards_(model.rewards),
      snapshots_(config.horizon) {
  config_.validate();
  check_shapes(model);
  if (model.d != config_.d || model.horizon != config_.horizon)
    throw std::invalid_argument("agent (d, H) = (" + std::to_string(config_.d) + ", " +
                                std::to_string(config_.horizon) + ") does not match model (" +
                                std::to_string(model.d) + ", " + std::to_string(model.horizon) + ")");
  const int H = config_.horizon, d = config_.d;
  for (int h = 0; h < H; ++h) regs_.emplace_back(d, config_.lambda);
  snapshot_log_det_.assign(idx(H), regs_.front().log_det());
  transcript_.resize(idx(H));
  w_hat_.assign(idx(H), Eigen::VectorXd::Zero(d));
  w_check_ = w_hat_;
  w_tilde_ = w_hat_;
  q_opt_.assign(idx(H * num_states_ * num_actions_), static_cast<double>(H));
  q_pess_.assign(q_opt_.size(), 0.0);
  v_opt_.assign(idx((H + 1) * num_states_), 0.0);
  v_pess_.assign(v_opt_.size(), 0.0);
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < num_states_; ++s) v_opt_[idx(h * num_states_ + s)] = H;
}

double LsviUcbPlusPlus::q_optimistic(int h, int s, int a) const { return q_opt_.at(sa(h, s, a)); }
double LsviUcbPlusPlus::q_pessimistic(int h, int s, int a) const { return q_pess_.at(sa(h, s, a)); }
double LsviUcbPlusPlus::v_optimistic(int h, int s) const { return v_opt_.at(idx(h * num_states_ + s)); }
double LsviUcbPlusPlus::v_pessimistic(int h, int s) const { return v_pess_.at(idx(h * num_states_ + s)); }

int LsviUcbPlusPlus::select_action(int h, int s) const {
  int best = 0;
  for (int a = 1; a < num_actions_; ++a)
    if (q_optimistic(h, s, a) > q_optimistic(h, s, best)) best = a;
  return best;
}

std::vector<double> LsviUcbPlusPlus::action_distribution(int h, int s) const {
  std::vector<double> p(idx(num_actions_), 0.0);
  p[idx(select_action(h, s))] = 1.0;
  return p;
}

RegressionTargets LsviUcbPlusPlus::targets_for(int h, int s_next) const {
  const double v = v_optimistic(h + 1, s_next);
  return {v, v_pessimistic(h + 1, s_next), v * v};
}

void LsviUcbPlusPlus::solve_stage(int h) {
  const RegressionState& reg = regs_[idx(h)];
  w_hat_[idx(h)] = reg.solve_weights(Target::kOptimistic);
  w_check_[idx(h)] = reg.solve_weights(Target::kPessimistic);
  w_tilde_[idx(h)] = reg.solve_weights(Target::kSquared);
}

void LsviUcbPlusPlus::refresh_stage(int h, int k) {
  RegressionState& reg = regs_[idx(h)];
  reg.reset_rhs();
  for (const TranscriptEntry& t : transcript_[idx(h)])
    reg.accumulate_rhs(t.phi, 1.0 / (t.sigma_bar * t.sigma_bar), targets_for(h, t.next_state));
  solve_stage(h);

  snapshots_.append(h, Epoch{k, w_hat_[idx(h)], w_check_[idx(h)], reg.precision_inv(),
                             config_.beta, config_.beta_bar});
  const Epoch& e = snapshots_.epochs(h).back();
  const double H = config_.horizon;
  for (int s = 0; s < num_states_; ++s) {
    double v = 0.0, v_check = 0.0;
    for (int a = 0; a < num_actions_; ++a) {
      const Eigen::VectorXd& phi = feature(s, a);
      const double width = std::sqrt(std::max(0.0, phi.dot(e.precision_inv * phi)));
      const double r = reward(h, s, a);
      double& q = q_opt_[sa(h, s, a)];
      q = std::max(std::min(q, r + e.w_hat.dot(phi) + e.beta * width), 0.0);
      double& q_check = q_pess_[sa(h, s, a)];
      q_check = std::min(std::max(q_check, r + e.w_check.dot(phi) - e.beta_bar * width), H);
      v = std::max(v, q);
      v_check = std::max(v_check, q_check);
    }
    v_opt_[idx(h * num_states_ + s)] = v;
    v_pess_[idx(h * num_states_ + s)] = v_check;
  }
}

bool LsviUcbPlusPlus::backward_pass(int k) {
  if (k <= 0) throw std::invalid_argument("episode index must be >= 1");
  if (k != episode_ + 1)
    throw std::logic_error("backward_pass called for episode " + std::to_string(k) +
                           ", expected " + std::to_string(episode_ + 1));
  if (episode_ > 0 && next_stage_ != config_.horizon)
    throw std::logic_error("previous episode was not fully observed");
  const int H = config_.horizon;

  // The trigger quantifies over all stages, so it is evaluated once up front.
  bool refresh = false;
  for (int h = 0; h < H; ++h)
    if (regs_[idx(h)].det_doubled(snapshot_log_det_[idx(h)])) refresh = true;

  if (refresh) {
    for (int h = H - 1; h >= 0; --h) refresh_stage(h, k);
    for (int h = 0; h < H; ++h) snapshot_log_det_[idx(h)] = regs_[idx(h)].log_det();
    refresh_episodes_.push_back(k);
  } else {
    for (int h = 0; h < H; ++h) solve_stage(h);
  }
  episode_ = k;
  next_stage_ = 0;
  refreshed_ = refresh;
  return refresh;
}

VarianceParts LsviUcbPlusPlus::estimate_variance(int h, const Eigen::VectorXd& phi) const {
  const RegressionState& reg = regs_.at(idx(h));
  const double H = config_.horizon, d = config_.d;
  const double bonus = reg.bonus(phi);
  const double opt = w_hat_[idx(h)].dot(phi);
  const double pess = w_check_[idx(h)].dot(phi);
  const double second = w_tilde_[idx(h)].dot(phi);

  VarianceParts v;
  v.bonus = bonus;
  const double first = std::clamp(opt, 0.0, H);
  v.v_bar = std::max(0.0, std::clamp(second, 0.0, H * H) - first * first);
  v.e_term = std::min(config_.beta_tilde * bonus, H * H) +
             std::min(2.0 * H * config_.beta_bar * bonus, H * H);
  const double d3 = d * d * d;
  v.d_term = config_.gap_scale * std::max(0.0, std::min(4.0 * d3 * H * H * (opt - pess + 2.0 * config_.beta_bar * bonus),
                                    d3 * H * H * H));
  v.sigma = std::sqrt(v.v_bar + v.e_term + v.d_term + H);
  v.sigma_bar = std::max({v.sigma, H, config_.sigma_floor_scale * 2.0 * d3 * H * H * std::sqrt(bonus)});
  return v;
}

VarianceParts LsviUcbPlusPlus::observe_transition(int h, int s, int a, int s_next) {
  if (episode_ == 0) throw std::logic_error("observe_transition before backward_pass");
  if (h != next_stage_)
    throw std::logic_error("observe_transition at stage " + std::to_string(h) + ", expected " +
                           std::to_string(next_stage_));
  if (s < 0 || s >= num_states_ || s_next < 0 || s_next >= num_states_ || a < 0 || a >= num_actions_)
    throw std::invalid_argument("state or action index out of range");

  const Eigen::VectorXd& phi = feature(s, a);
  const VarianceParts parts = estimate_variance(h, phi);
  const double weight = 1.0 / (parts.sigma_bar * parts.sigma_bar);
  regs_[idx(h)].rank_one_update(phi, weight, targets_for(h, s_next));
  transcript_[idx(h)].push_back({phi, s_next, parts.sigma_bar, episode_});
  ++next_stage_;

  if (debug_log_ != nullptr) {
    nlohmann::json line{{"k", episode_}, {"h", h + 1}, {"sigma", parts.sigma},
                        {"sigma_bar", parts.sigma_bar}, {"bonus", parts.bonus},
                        {"refresh", refreshed_}};
    *debug_log_ << line.dump() << '\n';
  }
  return parts;
}

EpisodeRecord LsviUcbPlusPlus::rollout(const LinearMdpSpec& env, Rng& rng) {
  if (env.d != config_.d || env.horizon != config_.horizon || env.num_states != num_states_ ||
      env.num_actions != num_actions_)
    throw std::invalid_argument("environment dimensions do not match the agent");
  EpisodeRecord rec;
  rec.k = episode_;
  rec.refreshed = refreshed_;
  int s = env.initial_state;
  rec.states.push_back(s);
  for (int h = 0; h < config_.horizon; ++h) {
    const int a = select_action(h, s);
    const int next = sample_next_state(env, h, s, a, rng);
    rec.actions.push_back(a);
    rec.rewards.push_back(env.reward(h, s, a));
    rec.variance.push_back(observe_transition(h, s, a, next));
    rec.states.push_back(next);
    s = next;
  }
  return rec;
}

Eigen::VectorXd LsviUcbPlusPlus::weights_from_scratch(int h, Target target) const {
  const int d = config_.d;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(d, d) * config_.lambda;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  for (const TranscriptEntry& t : transcript_.at(idx(h))) {
    const double w = 1.0 / (t.sigma_bar * t.sigma_bar);
    const RegressionTargets y = targets_for(h, t.next_state);
    const double value = target == Target::kOptimistic    ? y.optimistic
                         : target == Target::kPessimistic ? y.pessimistic
                                                          : y.squared;
    gram.noalias() += w * t.phi * t.phi.transpose();
    rhs.noalias() += (w * value) * t.phi;
  }
  return gram.llt().solve(rhs);
}

std::uint64_t LsviUcbPlusPlus::state_hash() const {
  StateHasher hasher;
  for (const auto& reg : regs_) {
    hasher.add(reg.precision().data(), static_cast<std::size_t>(reg.precision().size()));
    hasher.add(reg.precision_inv().data(), static_cast<std::size_t>(reg.precision_inv().size()));
    hasher.add(reg.log_det());
    for (int t = 0; t < 3; ++t) {
      const auto& r = reg.rhs(static_cast<Target>(t));
      hasher.add(r.data(), static_cast<std::size_t>(r.size()));
    }
  }
  for (const auto* table : {&w_hat_, &w_check_, &w_tilde_})
    for (const auto& w : *table) hasher.add(w.data(), static_cast<std::size_t>(w.size()));
  hasher.add(q_opt_.data(), q_opt_.size());
  hasher.add(q_pess_.data(), q_pess_.size());
  hasher.add(snapshot_log_det_.data(), snapshot_log_det_.size());
  for (const auto& stage : transcript_) hasher.add(stage.size());
  for (int h = 0; h < snapshots_.horizon(); ++h) hasher.add(snapshots_.epochs(h).size());
  hasher.add(episode_);
  hasher.add(next_stage_);
  hasher.add(refreshed_);
  return hasher.value();
}

}  // namespace lsvi
