#include "lsvi/regress.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lsvi {

namespace {
// Feature norms are bounded by one; allow rounding from normalization.
constexpr double kNormSlack = 1e-9;
}  // namespace

RegressionState::RegressionState(int dim, double lambda)
    : dim_(dim), lambda_(lambda) {
  if (dim < 1) throw std::invalid_argument("regression dimension must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("regression lambda must be positive");
  precision_ = Eigen::MatrixXd::Identity(dim, dim) * lambda;
  precision_inv_ = Eigen::MatrixXd::Identity(dim, dim) / lambda;
  log_det_ = dim * std::log(lambda);
  for (auto& r : rhs_) r = Eigen::VectorXd::Zero(dim);
}

void RegressionState::check_shape(const Eigen::VectorXd& phi) const {
  if (phi.size() != dim_)
    throw std::invalid_argument("feature has dimension " +
                                std::to_string(phi.size()) + ", expected " +
                                std::to_string(dim_));
}

void RegressionState::rank_one_update(const Eigen::VectorXd& phi, double weight,
                                      const RegressionTargets& targets) {
  check_shape(phi);
  if (!(weight > 0.0) || !std::isfinite(weight))
    throw std::invalid_argument("rank-one update weight must be positive");
  if (phi.norm() > 1.0 + kNormSlack)
    throw std::invalid_argument("feature norm exceeds 1");

  const Eigen::VectorXd u = precision_inv_ * phi;
  const double quad = phi.dot(u);
  const double denom = 1.0 + weight * quad;

  precision_.noalias() += weight * phi * phi.transpose();
  precision_inv_.noalias() -= (weight / denom) * u * u.transpose();
  precision_inv_ = 0.5 * (precision_inv_ + precision_inv_.transpose()).eval();
  log_det_ += std::log1p(weight * quad);
  accumulate_rhs(phi, weight, targets);

  if (++updates_ % kResyncInterval == 0) resynchronize();
}

void RegressionState::resynchronize() {
  Eigen::LLT<Eigen::MatrixXd> llt(precision_);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("precision matrix lost positive definiteness");
  precision_inv_ = llt.solve(Eigen::MatrixXd::Identity(dim_, dim_));
  precision_inv_ = 0.5 * (precision_inv_ + precision_inv_.transpose()).eval();
}

Eigen::VectorXd RegressionState::solve_weights(Target target) const {
  return precision_inv_ * rhs(target);
}

double RegressionState::bonus(const Eigen::VectorXd& phi) const {
  check_shape(phi);
  const double quad = phi.dot(precision_inv_ * phi);
  return quad > 0.0 ? std::sqrt(quad) : 0.0;
}

bool RegressionState::det_doubled(double snapshot_log_det) const {
  return log_det_ - snapshot_log_det >= std::log(2.0);
}

void RegressionState::reset_rhs() {
  for (auto& r : rhs_) r.setZero();
}

void RegressionState::accumulate_rhs(const Eigen::VectorXd& phi, double weight,
                                     const RegressionTargets& targets) {
  check_shape(phi);
  rhs_[0].noalias() += (weight * targets.optimistic) * phi;
  rhs_[1].noalias() += (weight * targets.pessimistic) * phi;
  rhs_[2].noalias() += (weight * targets.squared) * phi;
}

}  // namespace lsvi
