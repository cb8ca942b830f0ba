#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Dense>

namespace lsvi {

/// Regression targets that share one design matrix.
enum class Target : int { kOptimistic = 0, kPessimistic = 1, kSquared = 2 };

struct RegressionTargets {
  double optimistic = 0.0;
  double pessimistic = 0.0;
  double squared = 0.0;
};

/// Online weighted ridge regression over a d-dimensional feature space.
///
/// Keeps the precision matrix Sigma = lambda*I + sum_i w_i phi_i phi_i^T, its
/// inverse (maintained by Sherman-Morrison), the log-determinant, and one
/// weighted right-hand side per target. The precision matrix never depends on
/// the targets, so right-hand sides can be rebuilt independently via
/// reset_rhs() / accumulate_rhs().
class RegressionState {
 public:
  /// Number of rank-1 updates between dense re-inversions of the precision.
  static constexpr std::size_t kResyncInterval = 256;

  RegressionState(int dim, double lambda);

  void rank_one_update(const Eigen::VectorXd& phi, double weight,
                       const RegressionTargets& targets);

  /// Sigma^{-1} * rhs(target): the weighted ridge minimizer.
  Eigen::VectorXd solve_weights(Target target) const;

  /// sqrt(phi^T Sigma^{-1} phi), unscaled by any confidence radius.
  double bonus(const Eigen::VectorXd& phi) const;

  /// True iff det(Sigma) >= 2 * exp(snapshot_log_det), compared in log space.
  bool det_doubled(double snapshot_log_det) const;

  void reset_rhs();
  void accumulate_rhs(const Eigen::VectorXd& phi, double weight,
                      const RegressionTargets& targets);

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  double log_det() const { return log_det_; }
  std::size_t update_count() const { return updates_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  const Eigen::MatrixXd& precision_inv() const { return precision_inv_; }
  const Eigen::VectorXd& rhs(Target target) const {
    return rhs_[static_cast<int>(target)];
  }

 private:
  void check_shape(const Eigen::VectorXd& phi) const;
  void resynchronize();

  int dim_;
  double lambda_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd precision_inv_;
  double log_det_;
  std::array<Eigen::VectorXd, 3> rhs_;
  std::size_t updates_ = 0;
};

}  // namespace lsvi
