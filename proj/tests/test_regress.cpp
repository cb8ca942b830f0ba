#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "lsvi/regress.hpp"

using lsvi::RegressionState;
using lsvi::RegressionTargets;
using lsvi::Target;

namespace {

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

Eigen::VectorXd random_unit_ball(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v / v.norm() * u(rng);
}

// Dense mirror of a weighted ridge system.
struct Dense {
  Eigen::MatrixXd gram;
  std::vector<Eigen::VectorXd> rhs;
  Dense(int d, double lambda) : gram(Eigen::MatrixXd::Identity(d, d) * lambda), rhs(3, Eigen::VectorXd::Zero(d)) {}
  void add(const Eigen::VectorXd& phi, double w, const RegressionTargets& y) {
    gram += w * phi * phi.transpose();
    rhs[0] += w * y.optimistic * phi;
    rhs[1] += w * y.pessimistic * phi;
    rhs[2] += w * y.squared * phi;
  }
};

}  // namespace

TEST_CASE("init: identity, scaled identity and lambda = 1/H^2") {
  RegressionState a(2, 1.0);
  CHECK(a.precision().isApprox(Eigen::Matrix2d::Identity()));
  CHECK(a.log_det() == doctest::Approx(0.0));

  RegressionState b(3, 0.25);
  CHECK(b.log_det() == doctest::Approx(3.0 * std::log(0.25)));
  CHECK(b.log_det() == doctest::Approx(-4.1589).epsilon(1e-4));

  const double H = 2.0;
  RegressionState c(1, 1.0 / (H * H));
  CHECK(c.precision()(0, 0) == doctest::Approx(0.25));

  CHECK_THROWS_AS(RegressionState(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RegressionState(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(RegressionState(2, -1.0), std::invalid_argument);
}

TEST_CASE("rank_one_update: scalar case") {
  RegressionState s(1, 1.0);
  s.rank_one_update(Eigen::VectorXd::Ones(1), 1.0, {0, 0, 0});
  CHECK(s.precision()(0, 0) == doctest::Approx(2.0));
  CHECK(s.precision_inv()(0, 0) == doctest::Approx(0.5));
  CHECK(s.log_det() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("rank_one_update: zero feature leaves the system unchanged") {
  RegressionState s(3, 0.5);
  const double before = s.log_det();
  s.rank_one_update(Eigen::VectorXd::Zero(3), 0.7, {1, 2, 3});
  CHECK(s.log_det() == before);
  CHECK(s.precision().isApprox(Eigen::MatrixXd::Identity(3, 3) * 0.5));
  CHECK(s.solve_weights(Target::kOptimistic).isZero());
}

TEST_CASE("rank_one_update: inverse matches dense inversion") {
  RegressionState s(2, 1.0);
  Eigen::Vector2d phi(0.6, 0.8);
  s.rank_one_update(phi, 4.0, {0, 0, 0});
  const Eigen::Matrix2d dense = (Eigen::Matrix2d::Identity() + 4.0 * phi * phi.transpose()).inverse();
  CHECK((s.precision_inv() - dense).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(s.log_det() == doctest::Approx(std::log(5.0)));
}

TEST_CASE("rank_one_update: argument checks") {
  RegressionState s(2, 1.0);
  CHECK_THROWS_AS(s.rank_one_update(Eigen::VectorXd::Ones(3) * 0.1, 1.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(s.rank_one_update(Eigen::Vector2d(0.1, 0.1), 0.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(s.rank_one_update(Eigen::Vector2d(0.1, 0.1), -1.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(s.rank_one_update(Eigen::Vector2d(1.0, 1.0), 1.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(s.bonus(Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("solve_weights") {
  RegressionState empty(3, 0.3);
  for (Target t : {Target::kOptimistic, Target::kPessimistic, Target::kSquared})
    CHECK(empty.solve_weights(t).isZero());

  RegressionState s(1, 1.0);
  s.rank_one_update(Eigen::VectorXd::Ones(1), 1.0, {3.0, 0.0, 0.0});
  CHECK(s.solve_weights(Target::kOptimistic)[0] == doctest::Approx(1.5));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RegressionState r(3, 0.5);
  Dense dense(3, 0.5);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd phi = random_unit_ball(rng, 3);
    const double w = 1e-4 + u(rng);
    const RegressionTargets y{4 * u(rng), 2 * u(rng), 16 * u(rng)};
    r.rank_one_update(phi, w, y);
    dense.add(phi, w, y);
  }
  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd expect = dense.gram.ldlt().solve(dense.rhs[t]);
    CHECK(rel_err(r.solve_weights(static_cast<Target>(t)), expect) < 1e-8);
  }
}

TEST_CASE("bonus") {
  RegressionState s(2, 0.25);
  const Eigen::Vector2d phi(0.3, 0.4);
  CHECK(s.bonus(phi) == doctest::Approx(phi.norm() / std::sqrt(0.25)));
  CHECK(s.bonus(Eigen::Vector2d::Zero()) == 0.0);

  RegressionState t(2, 1.0);
  t.rank_one_update(Eigen::Vector2d(1.0, 0.0), 3.0, {});
  const Eigen::Matrix2d inv = (Eigen::Matrix2d::Identity() + 3.0 * Eigen::Vector2d(1, 0) * Eigen::Vector2d(1, 0).transpose()).inverse();
  CHECK(t.bonus(Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(std::sqrt(inv(0, 0))));
  CHECK(t.bonus(Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(0.5));
}

TEST_CASE("det_doubled: boundary and scalar arithmetic") {
  RegressionState s(1, 1.0);
  CHECK_FALSE(s.det_doubled(s.log_det()));
  CHECK(s.det_doubled(s.log_det() - std::log(2.0)));

  const double snapshot = s.log_det();
  for (int i = 0; i < 3; ++i) s.rank_one_update(Eigen::VectorXd::Ones(1), 1.0, {});
  CHECK(std::exp(s.log_det()) == doctest::Approx(4.0));
  CHECK(s.det_doubled(snapshot));
}

TEST_CASE("rhs rebuild keeps the precision and reproduces the weights") {
  std::mt19937_64 rng(3);
  RegressionState s(4, 0.1);
  std::vector<Eigen::VectorXd> phis;
  std::vector<double> ws;
  std::vector<RegressionTargets> ys;
  for (int i = 0; i < 50; ++i) {
    phis.push_back(random_unit_ball(rng, 4));
    ws.push_back(0.5);
    ys.push_back({1.0 * i / 50, 0.5, 2.0});
    s.rank_one_update(phis.back(), ws.back(), ys.back());
  }
  const Eigen::MatrixXd precision = s.precision();
  const Eigen::VectorXd w = s.solve_weights(Target::kOptimistic);
  s.reset_rhs();
  CHECK(s.solve_weights(Target::kOptimistic).isZero());
  for (std::size_t i = 0; i < phis.size(); ++i) s.accumulate_rhs(phis[i], ws[i], ys[i]);
  CHECK(s.precision() == precision);
  CHECK(rel_err(s.solve_weights(Target::kOptimistic), w) < 1e-12);
}

TEST_CASE("property: incremental state matches dense factorization, bonus monotone, SPD") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 16), len(1, 500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = dim(rng);
    const double lambda = std::pow(10.0, -2.0 + 2.0 * u(rng));
    RegressionState s(d, lambda);
    Dense dense(d, lambda);
    const Eigen::VectorXd probe = random_unit_ball(rng, d);
    double last_bonus = s.bonus(probe);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd phi = random_unit_ball(rng, d);
      const double w = 1e-4 + (1.0 - 1e-4) * u(rng);
      const RegressionTargets y{u(rng), u(rng), u(rng)};
      s.rank_one_update(phi, w, y);
      dense.add(phi, w, y);
      const double b = s.bonus(probe);
      CHECK(b <= last_bonus + 1e-12);
      last_bonus = b;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(s.precision());
    REQUIRE(llt.info() == Eigen::Success);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.precision()).eigenvalues().minCoeff() >= lambda - 1e-9);
    const Eigen::MatrixXd inv = dense.gram.inverse();
    CHECK(rel_err(s.precision_inv(), inv) < 1e-8);
    const double log_det = 2.0 * Eigen::LLT<Eigen::MatrixXd>(dense.gram).matrixL().toDenseMatrix().diagonal().array().log().sum();
    CHECK(std::abs(s.log_det() - log_det) / std::max(1.0, std::abs(log_det)) < 1e-8);
    for (int t = 0; t < 3; ++t)
      CHECK(rel_err(s.solve_weights(static_cast<Target>(t)), dense.gram.ldlt().solve(dense.rhs[t])) < 1e-8);
  }
}

TEST_CASE("resynchronization interval is exercised") {
  RegressionState s(2, 1.0);
  for (std::size_t i = 0; i < RegressionState::kResyncInterval + 3; ++i)
    s.rank_one_update(Eigen::Vector2d(0.5, 0.5), 1.0, {});
  CHECK(s.update_count() == RegressionState::kResyncInterval + 3);
  CHECK(rel_err(s.precision_inv(), s.precision().inverse()) < 1e-10);
}
