#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace lsvi {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the top 53 bits, identical on every
/// standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Finite episodic linear MDP. Stages are 0-based (h = 0..H-1).
///
/// P_h(s'|s,a) = <features(s,a), measures[h].row(s')>.
struct LinearMdpSpec {
  int d = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  int initial_state = 0;
  std::vector<Eigen::VectorXd> features;  // index s*A + a
  std::vector<Eigen::MatrixXd> measures;  // per stage, S x d
  std::vector<double> rewards;            // index (h*S + s)*A + a

  const Eigen::VectorXd& feature(int s, int a) const {
    return features[static_cast<std::size_t>(s * num_actions + a)];
  }
  double reward(int h, int s, int a) const {
    return rewards[static_cast<std::size_t>((h * num_states + s) * num_actions + a)];
  }
  /// Induced next-state distribution for (h, s, a).
  Eigen::VectorXd transition_row(int h, int s, int a) const {
    return measures[static_cast<std::size_t>(h)] * feature(s, a);
  }
};

/// Throws std::invalid_argument unless every table has the declared shape.
void check_shapes(const LinearMdpSpec& spec);

struct Violation {
  int h = -1;  // -1 when not stage-specific
  int s = -1;
  int a = -1;
  std::string kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_spec(const LinearMdpSpec& spec, double tol = 1e-10);

int sample_next_state(const LinearMdpSpec& spec, int h, int s, int a, Rng& rng);

/// Tabular MDP in flat row-major storage.
struct TabularMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  std::vector<double> transitions;  // index ((h*S + s)*A + a)*S + s'
  std::vector<double> rewards;      // index (h*S + s)*A + a
};

/// One-hot realization: d = S*A, phi(s,a) = e_{s*A+a},
/// theta_h(s')_{s*A+a} = P_h(s'|s,a).
LinearMdpSpec make_tabular_embedding(const TabularMdp& mdp);

/// Dense transition tensor of any linear MDP, in TabularMdp layout.
TabularMdp extract_tabular(const LinearMdpSpec& spec);

LinearMdpSpec make_random_simplex_mdp(int d, int num_states, int num_actions,
                                      int horizon, Rng& rng);

/// Random tabular MDP (Dirichlet(1) rows, uniform rewards), one-hot embedded.
LinearMdpSpec make_random_tabular_mdp(int num_states, int num_actions,
                                      int horizon, Rng& rng);

/// Deterministic policy: action per (h, s), index h*S + s.
using Policy = std::vector<int>;
/// Stochastic policy: probabilities per (h, s, a), index (h*S + s)*A + a.
using StochasticPolicy = std::vector<double>;

struct DpTables {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> v_star;  // (H+1) x S, last row zero
  std::vector<double> q_star;  // H x S x A

  double v(int h, int s) const {
    return v_star[static_cast<std::size_t>(h * num_states + s)];
  }
  double q(int h, int s, int a) const {
    return q_star[static_cast<std::size_t>((h * num_states + s) * num_actions + a)];
  }
};

DpTables optimal_values_dp(const LinearMdpSpec& spec);

/// Greedy policy w.r.t. Q*, lowest index on ties.
Policy greedy_policy(const DpTables& tables);

/// V^pi as an (H+1) x S table (last row zero).
std::vector<double> policy_value_dp(const LinearMdpSpec& spec, const Policy& policy);
std::vector<double> policy_value_dp(const LinearMdpSpec& spec,
                                    const StochasticPolicy& policy);

nlohmann::json spec_to_json(const LinearMdpSpec& spec);
LinearMdpSpec spec_from_json(const nlohmann::json& j);
void save_spec(const LinearMdpSpec& spec, const std::string& path);
LinearMdpSpec load_spec(const std::string& path);

}  // namespace lsvi
