#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "lsvi/envs.hpp"

using namespace lsvi;

namespace {

TabularMdp chain_2x2() {
  // Action 0 stays, action 1 moves to the other state; reward 1 for being in state 1.
  TabularMdp m;
  m.num_states = 2;
  m.num_actions = 2;
  m.horizon = 2;
  m.transitions.assign(2 * 2 * 2 * 2, 0.0);
  m.rewards.assign(2 * 2 * 2, 0.0);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        const int next = a == 0 ? s : 1 - s;
        m.transitions[static_cast<std::size_t>(((h * 2 + s) * 2 + a) * 2 + next)] = 1.0;
        m.rewards[static_cast<std::size_t>((h * 2 + s) * 2 + a)] = s == 1 ? 1.0 : 0.1 * a;
      }
  return m;
}

bool has_kind(const ValidationReport& r, const std::string& kind) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

// Value of a deterministic policy by explicit recursion over trajectories.
double brute_value(const LinearMdpSpec& spec, const Policy& pi, int h, int s) {
  if (h == spec.horizon) return 0.0;
  const int a = pi[static_cast<std::size_t>(h * spec.num_states + s)];
  const Eigen::VectorXd p = spec.transition_row(h, s, a);
  double v = spec.reward(h, s, a);
  for (int n = 0; n < spec.num_states; ++n) v += p[n] * brute_value(spec, pi, h + 1, n);
  return v;
}

}  // namespace

TEST_CASE("validate_spec: embeddings and generators pass") {
  CHECK(validate_spec(make_tabular_embedding(chain_2x2())).ok());
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const LinearMdpSpec spec = make_random_simplex_mdp(3, 5, 2, 2, rng);
    REQUIRE(validate_spec(spec).ok());
  }
}

TEST_CASE("validate_spec: violations are reported by kind") {
  Rng rng(1);
  LinearMdpSpec spec = make_random_simplex_mdp(3, 4, 2, 2, rng);
  LinearMdpSpec bad = spec;
  bad.features[0] = bad.features[0].normalized() * 1.5;
  const ValidationReport r = validate_spec(bad);
  CHECK_FALSE(r.ok());
  CHECK(has_kind(r, "feature norm"));
  CHECK(r.to_string().find("feature norm") != std::string::npos);

  bad = spec;
  bad.rewards[0] = 1.5;
  CHECK(has_kind(validate_spec(bad), "reward range"));

  bad = spec;
  bad.initial_state = 7;
  CHECK(has_kind(validate_spec(bad), "initial state"));

  bad = spec;
  bad.measures[0](0, 0) += 0.5;
  const ValidationReport r2 = validate_spec(bad);
  CHECK(has_kind(r2, "transition sum"));

  bad = spec;
  bad.measures[1] *= 3.0;
  CHECK(has_kind(validate_spec(bad), "measure norm"));

  bad = spec;
  bad.features.pop_back();
  CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);
}

TEST_CASE("sample_next_state") {
  TabularMdp m;
  m.num_states = 4;
  m.num_actions = 1;
  m.horizon = 1;
  m.transitions = {0, 0, 1, 0};
  m.rewards = {0, 0, 0, 0};
  m.transitions.resize(16, 0.0);
  for (int s = 1; s < 4; ++s) m.transitions[static_cast<std::size_t>(s * 4)] = 1.0;
  const LinearMdpSpec det = make_tabular_embedding(m);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(sample_next_state(det, 0, 0, 0, rng) == 2);

  SUBCASE("uniform row, 100k draws within 3 sigma") {
    TabularMdp u = m;
    for (int s = 0; s < 4; ++s)
      for (int n = 0; n < 4; ++n) u.transitions[static_cast<std::size_t>(s * 4 + n)] = 0.25;
    const LinearMdpSpec spec = make_tabular_embedding(u);
    const int N = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < N; ++i) ++counts[static_cast<std::size_t>(sample_next_state(spec, 0, 0, 0, rng))];
    const double sd = std::sqrt(N * 0.25 * 0.75);
    for (int c : counts) CHECK(std::abs(c - N * 0.25) < 3.0 * sd);
  }

  SUBCASE("fixed seed gives an identical draw sequence") {
    Rng g(99);
    const LinearMdpSpec spec = make_random_simplex_mdp(3, 6, 2, 2, g);
    Rng a(42), b(42);
    for (int i = 0; i < 500; ++i) CHECK(sample_next_state(spec, 1, i % 6, i % 2, a) == sample_next_state(spec, 1, i % 6, i % 2, b));
  }
}

TEST_CASE("sampler: chi-square goodness of fit on a simplex row") {
  Rng g(7);
  const LinearMdpSpec spec = make_random_simplex_mdp(4, 5, 2, 1, g);
  const Eigen::VectorXd p = spec.transition_row(0, 3, 1);
  const int N = 100000;
  std::vector<double> counts(5, 0.0);
  Rng rng(8);
  for (int i = 0; i < N; ++i) counts[static_cast<std::size_t>(sample_next_state(spec, 0, 3, 1, rng))] += 1.0;
  double chi2 = 0.0;
  int cells = 0;
  for (int s = 0; s < 5; ++s) {
    if (p[s] <= 0.0) {
      CHECK(counts[static_cast<std::size_t>(s)] == 0.0);
      continue;
    }
    const double e = N * p[s];
    chi2 += (counts[static_cast<std::size_t>(s)] - e) * (counts[static_cast<std::size_t>(s)] - e) / e;
    ++cells;
  }
  // Upper 1e-3 quantiles of chi-square with 1..4 degrees of freedom.
  const double critical[] = {10.828, 13.816, 16.266, 18.467};
  REQUIRE(cells >= 2);
  CHECK(chi2 < critical[cells - 2]);
}

TEST_CASE("tabular embedding") {
  const TabularMdp m = chain_2x2();
  const LinearMdpSpec spec = make_tabular_embedding(m);
  CHECK(spec.d == 4);
  CHECK(spec.feature(1, 0) == Eigen::Vector4d(0, 0, 1, 0));
  const TabularMdp back = extract_tabular(spec);
  CHECK(back.transitions == m.transitions);
  CHECK(back.rewards == m.rewards);

  Rng rng(3);
  const LinearMdpSpec r = make_random_tabular_mdp(3, 2, 2, rng);
  const TabularMdp t = extract_tabular(r);
  const LinearMdpSpec again = make_tabular_embedding(t);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) {
        const Eigen::VectorXd p = again.transition_row(h, s, a);
        for (int n = 0; n < 3; ++n)
          CHECK(std::abs(p[n] - t.transitions[static_cast<std::size_t>(((h * 3 + s) * 2 + a) * 3 + n)]) <= 1e-15);
      }
  CHECK(extract_tabular(again).transitions == t.transitions);

  TabularMdp broken = m;
  broken.transitions[0] = 0.5;
  CHECK_THROWS_AS(make_tabular_embedding(broken), std::invalid_argument);
}

TEST_CASE("make_random_simplex_mdp") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const LinearMdpSpec spec = make_random_simplex_mdp(5, 7, 3, 3, rng);
    REQUIRE(validate_spec(spec).ok());
    for (int h = 0; h < 3; ++h) {
      CHECK(spec.measures[static_cast<std::size_t>(h)].colwise().sum().norm() == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
      for (int s = 0; s < 7; ++s)
        for (int a = 0; a < 3; ++a) CHECK(std::abs(spec.transition_row(h, s, a).sum() - 1.0) <= 1e-12);
    }
  }
  Rng a(4), b(4);
  CHECK(spec_to_json(make_random_simplex_mdp(3, 4, 2, 2, a)) == spec_to_json(make_random_simplex_mdp(3, 4, 2, 2, b)));
}

TEST_CASE("optimal_values_dp") {
  Rng rng(12);
  LinearMdpSpec one = make_random_simplex_mdp(3, 4, 3, 1, rng);
  const DpTables t1 = optimal_values_dp(one);
  for (int s = 0; s < 4; ++s) {
    double best = 0.0;
    for (int a = 0; a < 3; ++a) best = std::max(best, one.reward(0, s, a));
    CHECK(t1.v(0, s) == doctest::Approx(best));
  }

  LinearMdpSpec zero = one;
  std::fill(zero.rewards.begin(), zero.rewards.end(), 0.0);
  const DpTables t0 = optimal_values_dp(zero);
  for (double v : t0.v_star) CHECK(v == 0.0);

  SUBCASE("brute-force policy enumeration on 2 states, 2 actions, H = 2") {
    Rng g(31);
    const LinearMdpSpec spec = make_random_tabular_mdp(2, 2, 2, g);
    const DpTables t = optimal_values_dp(spec);
    for (int s0 = 0; s0 < 2; ++s0) {
      double best = -1.0;
      for (int code = 0; code < 16; ++code) {
        Policy pi(4);
        for (int i = 0; i < 4; ++i) pi[static_cast<std::size_t>(i)] = (code >> i) & 1;
        best = std::max(best, brute_value(spec, pi, 0, s0));
      }
      CHECK(t.v(0, s0) == doctest::Approx(best).epsilon(1e-12));
    }
  }

  SUBCASE("values lie in [0, H - h] and dominate every policy") {
    Rng g(2);
    const LinearMdpSpec spec = make_random_simplex_mdp(4, 6, 3, 4, g);
    const DpTables t = optimal_values_dp(spec);
    for (int h = 0; h <= 4; ++h)
      for (int s = 0; s < 6; ++s) {
        CHECK(t.v(h, s) >= 0.0);
        CHECK(t.v(h, s) <= 4 - h + 1e-12);
      }
    std::uniform_int_distribution<int> pick(0, 2);
    for (int trial = 0; trial < 50; ++trial) {
      Policy pi(24);
      for (int& a : pi) a = pick(g);
      const std::vector<double> v = policy_value_dp(spec, pi);
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] <= t.v_star[i] + 1e-10);
    }
  }
}

TEST_CASE("policy_value_dp") {
  Rng rng(17);
  const LinearMdpSpec spec = make_random_simplex_mdp(3, 5, 3, 3, rng);
  const DpTables t = optimal_values_dp(spec);
  const std::vector<double> v = policy_value_dp(spec, greedy_policy(t));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - t.v_star[i]) <= 1e-10);

  Rng g(1);
  const LinearMdpSpec h1 = make_random_simplex_mdp(3, 4, 3, 1, g);
  const std::vector<double> fixed = policy_value_dp(h1, Policy(4, 2));
  for (int s = 0; s < 4; ++s) CHECK(fixed[static_cast<std::size_t>(s)] == doctest::Approx(h1.reward(0, s, 2)));

  SUBCASE("deterministic and one-hot stochastic policies agree") {
    Policy pi(15);
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = static_cast<int>(i % 3);
    StochasticPolicy sp(45, 0.0);
    for (std::size_t i = 0; i < pi.size(); ++i) sp[i * 3 + static_cast<std::size_t>(pi[i])] = 1.0;
    CHECK(policy_value_dp(spec, pi) == policy_value_dp(spec, sp));
  }
}

TEST_CASE("policy_value_dp: random policy matches a Monte-Carlo rollout mean") {
  Rng g(23);
  const LinearMdpSpec spec = make_random_tabular_mdp(3, 2, 3, g);
  StochasticPolicy pi(3 * 3 * 2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (std::size_t i = 0; i < pi.size(); i += 2) {
    pi[i] = u(g);
    pi[i + 1] = 1.0 - pi[i];
  }
  const double exact = policy_value_dp(spec, pi)[static_cast<std::size_t>(spec.initial_state)];

  Rng rng(24);
  const int N = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int n = 0; n < N; ++n) {
    int s = spec.initial_state;
    double ret = 0.0;
    for (int h = 0; h < 3; ++h) {
      const int a = uniform01(rng) < pi[static_cast<std::size_t>((h * 3 + s) * 2)] ? 0 : 1;
      ret += spec.reward(h, s, a);
      s = sample_next_state(spec, h, s, a, rng);
    }
    sum += ret;
    sum2 += ret * ret;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sum2 / N - mean * mean) / N);
  CHECK(std::abs(mean - exact) < 3.0 * se);
}

TEST_CASE("spec JSON round trip") {
  Rng rng(9);
  const LinearMdpSpec spec = make_random_simplex_mdp(3, 4, 2, 3, rng);
  const LinearMdpSpec back = spec_from_json(spec_to_json(spec));
  CHECK(spec_to_json(back) == spec_to_json(spec));
  CHECK(back.measures[2] == spec.measures[2]);
  CHECK(back.features[5] == spec.features[5]);

  const auto path = std::filesystem::temp_directory_path() / "lsvi_envs_roundtrip.json";
  save_spec(spec, path.string());
  const LinearMdpSpec loaded = load_spec(path.string());
  std::filesystem::remove(path);
  CHECK(loaded.rewards == spec.rewards);
  CHECK(loaded.measures[0] == spec.measures[0]);

  nlohmann::json broken = spec_to_json(spec);
  broken["rewards"].erase(0);
  CHECK_THROWS_AS(spec_from_json(broken), std::invalid_argument);
  CHECK_THROWS(load_spec("/nonexistent/lsvi.json"));
}
