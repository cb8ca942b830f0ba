#include "lsvi/envs.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lsvi {

namespace {

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

Eigen::VectorXd sample_simplex(int n, Rng& rng) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = -std::log1p(-uniform01(rng));
  return x / x.sum();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

void check_shapes(const LinearMdpSpec& spec) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("linear MDP shape mismatch: " + what);
  };
  if (spec.d < 1 || spec.horizon < 1 || spec.num_states < 1 || spec.num_actions < 1)
    fail("dimensions must be positive");
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
  if (spec.features.size() != idx(S * A)) fail("features must have S*A entries");
  for (const auto& phi : spec.features)
    if (phi.size() != spec.d) fail("feature vector length != d");
  if (spec.measures.size() != idx(H)) fail("measures must have H entries");
  for (const auto& m : spec.measures)
    if (m.rows() != S || m.cols() != spec.d) fail("measure must be S x d");
  if (spec.rewards.size() != idx(H * S * A)) fail("rewards must have H*S*A entries");
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok\n";
  std::ostringstream os;
  for (const auto& v : violations) {
    os << v.kind;
    if (v.h >= 0) os << " h=" << v.h;
    if (v.s >= 0) os << " s=" << v.s;
    if (v.a >= 0) os << " a=" << v.a;
    os << ": " << v.detail << '\n';
  }
  return os.str();
}

ValidationReport validate_spec(const LinearMdpSpec& spec, double tol) {
  check_shapes(spec);
  ValidationReport report;
  auto add = [&](int h, int s, int a, const char* kind, const std::string& detail) {
    report.violations.push_back({h, s, a, kind, detail});
  };
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;

  if (spec.initial_state < 0 || spec.initial_state >= S)
    add(-1, spec.initial_state, -1, "initial state", "out of range");

  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double n = spec.feature(s, a).norm();
      if (!(n <= 1.0 + tol)) add(-1, s, a, "feature norm", fmt(n) + " > 1");
    }

  const double measure_cap = std::sqrt(static_cast<double>(spec.d));
  for (int h = 0; h < H; ++h) {
    const double mn = spec.measures[idx(h)].colwise().sum().norm();
    if (!(mn <= measure_cap + tol))
      add(h, -1, -1, "measure norm", fmt(mn) + " > sqrt(d)");
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd p = spec.transition_row(h, s, a);
        const double lo = p.minCoeff(), hi = p.maxCoeff();
        if (!(lo >= -tol) || !(hi <= 1.0 + tol))
          add(h, s, a, "transition probability",
              "entries in [" + fmt(lo) + ", " + fmt(hi) + "]");
        if (!(std::abs(p.sum() - 1.0) <= tol))
          add(h, s, a, "transition sum", fmt(p.sum()) + " != 1");
        const double r = spec.reward(h, s, a);
        if (!(r >= 0.0 && r <= 1.0)) add(h, s, a, "reward range", fmt(r) + " not in [0,1]");
      }
  }
  return report;
}

int sample_next_state(const LinearMdpSpec& spec, int h, int s, int a, Rng& rng) {
  const Eigen::VectorXd p = spec.transition_row(h, s, a);
  const double u = uniform01(rng);
  double cum = 0.0;
  int last_positive = 0;
  for (int next = 0; next < p.size(); ++next) {
    if (p[next] <= 0.0) continue;
    cum += p[next];
    last_positive = next;
    if (u < cum) return next;
  }
  // u landed in the rounding gap above the final cumulative sum.
  return last_positive;
}

LinearMdpSpec make_tabular_embedding(const TabularMdp& mdp) {
  const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
  if (S < 1 || A < 1 || H < 1)
    throw std::invalid_argument("tabular MDP dimensions must be positive");
  if (mdp.transitions.size() != idx(H * S * A * S) || mdp.rewards.size() != idx(H * S * A))
    throw std::invalid_argument("tabular MDP table shape mismatch");

  LinearMdpSpec spec;
  spec.d = S * A;
  spec.horizon = H;
  spec.num_states = S;
  spec.num_actions = A;
  spec.initial_state = mdp.initial_state;
  spec.rewards = mdp.rewards;
  spec.features.reserve(idx(S * A));
  for (int j = 0; j < S * A; ++j) spec.features.push_back(Eigen::VectorXd::Unit(S * A, j));

  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(S, S * A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const std::size_t row = idx(((h * S + s) * A + a) * S);
        double sum = 0.0;
        for (int next = 0; next < S; ++next) {
          const double p = mdp.transitions[row + idx(next)];
          if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("transition probability outside [0,1]");
          theta(next, s * A + a) = p;
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-10)
          throw std::invalid_argument("transition row does not sum to 1");
      }
    spec.measures.push_back(std::move(theta));
  }
  return spec;
}

TabularMdp extract_tabular(const LinearMdpSpec& spec) {
  check_shapes(spec);
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
  TabularMdp mdp{S, A, H, spec.initial_state, {}, spec.rewards};
  mdp.transitions.resize(idx(H * S * A * S));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const Eigen::VectorXd p = spec.transition_row(h, s, a);
        for (int next = 0; next < S; ++next)
          mdp.transitions[idx(((h * S + s) * A + a) * S + next)] = p[next];
      }
  return mdp;
}

LinearMdpSpec make_random_simplex_mdp(int d, int num_states, int num_actions,
                                      int horizon, Rng& rng) {
  if (d < 2 || num_states < 2 || num_actions < 2 || horizon < 1)
    throw std::invalid_argument("simplex MDP requires d, S, A >= 2 and H >= 1");
  LinearMdpSpec spec;
  spec.d = d;
  spec.horizon = horizon;
  spec.num_states = num_states;
  spec.num_actions = num_actions;
  for (int j = 0; j < num_states * num_actions; ++j)
    spec.features.push_back(sample_simplex(d, rng));
  for (int h = 0; h < horizon; ++h) {
    Eigen::MatrixXd theta(num_states, d);
    for (int j = 0; j < d; ++j) theta.col(j) = sample_simplex(num_states, rng);
    spec.measures.push_back(std::move(theta));
  }
  spec.rewards.resize(idx(horizon * num_states * num_actions));
  for (auto& r : spec.rewards) r = uniform01(rng);
  return spec;
}

LinearMdpSpec make_random_tabular_mdp(int num_states, int num_actions, int horizon,
                                      Rng& rng) {
  if (num_states < 1 || num_actions < 1 || horizon < 1)
    throw std::invalid_argument("tabular MDP dimensions must be positive");
  TabularMdp mdp{num_states, num_actions, horizon, 0, {}, {}};
  mdp.transitions.reserve(idx(horizon * num_states * num_actions * num_states));
  for (int row = 0; row < horizon * num_states * num_actions; ++row) {
    const Eigen::VectorXd p = sample_simplex(num_states, rng);
    mdp.transitions.insert(mdp.transitions.end(), p.data(), p.data() + p.size());
  }
  mdp.rewards.resize(idx(horizon * num_states * num_actions));
  for (auto& r : mdp.rewards) r = uniform01(rng);
  return make_tabular_embedding(mdp);
}

DpTables optimal_values_dp(const LinearMdpSpec& spec) {
  check_shapes(spec);
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
  DpTables t{H, S, A, std::vector<double>(idx((H + 1) * S), 0.0),
             std::vector<double>(idx(H * S * A), 0.0)};
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::Map<const Eigen::VectorXd> v_next(t.v_star.data() + (h + 1) * S, S);
    for (int s = 0; s < S; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        const double q = spec.reward(h, s, a) + spec.transition_row(h, s, a).dot(v_next);
        t.q_star[idx((h * S + s) * A + a)] = q;
        if (q > best) best = q;
      }
      t.v_star[idx(h * S + s)] = best;
    }
  }
  return t;
}

Policy greedy_policy(const DpTables& tables) {
  const int S = tables.num_states, A = tables.num_actions;
  Policy pi(idx(tables.horizon * S), 0);
  for (int h = 0; h < tables.horizon; ++h)
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a)
        if (tables.q(h, s, a) > tables.q(h, s, best)) best = a;
      pi[idx(h * S + s)] = best;
    }
  return pi;
}

std::vector<double> policy_value_dp(const LinearMdpSpec& spec, const Policy& policy) {
  check_shapes(spec);
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
  if (policy.size() != idx(H * S)) throw std::invalid_argument("policy must have H*S entries");
  std::vector<double> v(idx((H + 1) * S), 0.0);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::Map<const Eigen::VectorXd> v_next(v.data() + (h + 1) * S, S);
    for (int s = 0; s < S; ++s) {
      const int a = policy[idx(h * S + s)];
      if (a < 0 || a >= A) throw std::invalid_argument("policy action out of range");
      v[idx(h * S + s)] = spec.reward(h, s, a) + spec.transition_row(h, s, a).dot(v_next);
    }
  }
  return v;
}

std::vector<double> policy_value_dp(const LinearMdpSpec& spec,
                                    const StochasticPolicy& policy) {
  check_shapes(spec);
  const int S = spec.num_states, A = spec.num_actions, H = spec.horizon;
  if (policy.size() != idx(H * S * A))
    throw std::invalid_argument("stochastic policy must have H*S*A entries");
  std::vector<double> v(idx((H + 1) * S), 0.0);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::Map<const Eigen::VectorXd> v_next(v.data() + (h + 1) * S, S);
    for (int s = 0; s < S; ++s) {
      double total = 0.0;
      for (int a = 0; a < A; ++a) {
        const double prob = policy[idx((h * S + s) * A + a)];
        if (prob == 0.0) continue;
        total += prob * (spec.reward(h, s, a) + spec.transition_row(h, s, a).dot(v_next));
      }
      v[idx(h * S + s)] = total;
    }
  }
  return v;
}

nlohmann::json spec_to_json(const LinearMdpSpec& spec) {
  check_shapes(spec);
  nlohmann::json j;
  j["d"] = spec.d;
  j["H"] = spec.horizon;
  j["S"] = spec.num_states;
  j["A"] = spec.num_actions;
  j["initial_state"] = spec.initial_state;
  std::vector<double> features;
  for (const auto& phi : spec.features) features.insert(features.end(), phi.data(), phi.data() + phi.size());
  j["features"] = features;
  auto measures = nlohmann::json::array();
  for (const auto& m : spec.measures) {
    std::vector<double> flat;
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    measures.push_back(flat);
  }
  j["measures"] = measures;
  j["rewards"] = spec.rewards;
  return j;
}

LinearMdpSpec spec_from_json(const nlohmann::json& j) {
  LinearMdpSpec spec;
  try {
    spec.d = j.at("d").get<int>();
    spec.horizon = j.at("H").get<int>();
    spec.num_states = j.at("S").get<int>();
    spec.num_actions = j.at("A").get<int>();
    spec.initial_state = j.value("initial_state", 0);
    const auto features = j.at("features").get<std::vector<double>>();
    const auto measures = j.at("measures").get<std::vector<std::vector<double>>>();
    spec.rewards = j.at("rewards").get<std::vector<double>>();

    const int S = spec.num_states, A = spec.num_actions, d = spec.d;
    if (d < 1 || S < 1 || A < 1 || spec.horizon < 1)
      throw std::invalid_argument("dimensions must be positive");
    if (features.size() != idx(S * A * d))
      throw std::invalid_argument("features must hold S*A*d values");
    for (int j2 = 0; j2 < S * A; ++j2)
      spec.features.push_back(Eigen::Map<const Eigen::VectorXd>(features.data() + j2 * d, d));
    for (const auto& flat : measures) {
      if (flat.size() != idx(S * d)) throw std::invalid_argument("measure must hold S*d values");
      spec.measures.push_back(
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              flat.data(), S, d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed linear MDP document: ") + e.what());
  }
  check_shapes(spec);
  return spec;
}

void save_spec(const LinearMdpSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << spec_to_json(spec).dump(1) << '\n';
}

LinearMdpSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("cannot parse " + path + ": " + e.what());
  }
  return spec_from_json(j);
}

}  // namespace lsvi
