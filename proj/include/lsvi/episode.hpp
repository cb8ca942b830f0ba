#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "lsvi/envs.hpp"

namespace lsvi {

/// Terms of the per-step variance estimate. sigma_bar is the regression
/// weight denominator: the sample is weighted by sigma_bar^-2.
struct VarianceParts {
  double v_bar = 0.0;
  double e_term = 0.0;
  double d_term = 0.0;
  double sigma = 0.0;
  double sigma_bar = 0.0;
  double bonus = 0.0;  // unscaled sqrt(phi^T Sigma^-1 phi)
};

/// One rollout. states has H+1 entries; variance is empty for agents that do
/// not estimate variances.
struct EpisodeRecord {
  int k = 0;
  bool refreshed = false;
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<VarianceParts> variance;
};

/// Common episode interface for learners driven by the harness.
///
/// An episode is prepare_episode(k) (planning for episode k) followed by
/// rollout(). Between the two the harness reads the deployed policy through
/// action_distribution().
class EpisodicAgent {
 public:
  virtual ~EpisodicAgent() = default;

  virtual std::string_view name() const = 0;
  virtual void prepare_episode(int k) = 0;
  virtual EpisodeRecord rollout(const LinearMdpSpec& env, Rng& rng) = 0;

  EpisodeRecord run_episode(const LinearMdpSpec& env, int k, Rng& rng) {
    prepare_episode(k);
    return rollout(env, rng);
  }

  /// Probability of each action at (h, s) under the current episode policy.
  virtual std::vector<double> action_distribution(int h, int s) const = 0;

  /// Number of value refreshes so far (0 for agents that never refresh).
  virtual int refresh_count() const { return 0; }
  virtual bool refreshed_this_episode() const { return false; }

  /// Hash of all mutable learner state, for purity checks on observers.
  virtual std::uint64_t state_hash() const = 0;
};

/// FNV-1a over raw bytes.
class StateHasher {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ULL;
    }
  }
  template <typename T>
  void add(const T& value) { add_bytes(&value, sizeof(T)); }
  void add(const double* data, std::size_t n) { add_bytes(data, n * sizeof(double)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 14695981039346656037ULL;
};

}  // namespace lsvi
