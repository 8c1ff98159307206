#ifndef REPROBANDIT_ENVIRONMENTS_HPP
#define REPROBANDIT_ENVIRONMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "reprobandit/errors.hpp"
#include "reprobandit/shared_randomness.hpp"

namespace reprobandit {

inline constexpr double kNormSlack = 1e-9;

// ---------------------------------------------------------------------------
// K-armed bandits
// ---------------------------------------------------------------------------

enum class RewardDistribution { bernoulli, uniform_around_mean };

class MabEnvironment {
 public:
  explicit MabEnvironment(std::vector<double> means,
                          RewardDistribution kind = RewardDistribution::bernoulli)
      : means_(std::move(means)), kind_(kind) {
    if (means_.empty()) throw InvalidArgument("MAB environment needs at least one arm");
    for (double m : means_) {
      if (!(m >= 0.0 && m <= 1.0)) throw InvalidArgument("arm means must lie in [0,1]");
    }
  }

  std::size_t arms() const noexcept { return means_.size(); }
  double mean(std::size_t arm) const {
    if (arm >= means_.size()) throw InvalidArm("arm index " + std::to_string(arm) + " out of range");
    return means_[arm];
  }
  const std::vector<double>& means() const noexcept { return means_; }
  double best_mean() const noexcept { return *std::max_element(means_.begin(), means_.end()); }
  RewardDistribution distribution() const noexcept { return kind_; }

 private:
  std::vector<double> means_;
  RewardDistribution kind_;
};

struct GapProfile {
  std::vector<double> gaps;
  double h_delta = 0.0;  // sum of 1/gap over strictly suboptimal arms
};

inline GapProfile gap_profile(const MabEnvironment& env) {
  GapProfile out;
  const double best = env.best_mean();
  out.gaps.reserve(env.arms());
  for (double m : env.means()) {
    const double gap = best - m;
    out.gaps.push_back(gap);
    if (gap > 0.0) out.h_delta += 1.0 / gap;
  }
  return out;
}

// Per-execution reward randomness. Sample k of arm a is a pure function of
// (seed, a, k), so a run can be replayed pull by pull.
class MabRewardStream {
 public:
  explicit MabRewardStream(RewardSeed seed) : seed_(seed) {}

  double pull(const MabEnvironment& env, std::size_t arm) {
    const double mu = env.mean(arm);
    CounterEngine& eng = engine_for(arm);
    const double u = detail::to_unit(eng());
    switch (env.distribution()) {
      case RewardDistribution::bernoulli:
        return u < mu ? 1.0 : 0.0;
      case RewardDistribution::uniform_around_mean: {
        const double half = std::min(mu, 1.0 - mu);
        return std::clamp(mu - half + 2.0 * half * u, 0.0, 1.0);
      }
    }
    return mu;
  }

  std::uint64_t pulls_of(std::size_t arm) const noexcept {
    return arm < engines_.size() ? engines_[arm].position() : 0;
  }

 private:
  CounterEngine& engine_for(std::size_t arm) {
    if (arm >= engines_.size()) {
      const std::size_t old = engines_.size();
      engines_.resize(arm + 1);
      for (std::size_t a = old; a <= arm; ++a) {
        engines_[a] = CounterEngine(detail::combine(detail::mix64(seed_.value ^ 0xA5A5A5A5ULL), a));
      }
    }
    return engines_[arm];
  }

  RewardSeed seed_;
  std::vector<CounterEngine> engines_;
};

inline double pull_mab(const MabEnvironment& env, std::size_t arm, MabRewardStream& stream) {
  return stream.pull(env, arm);
}

// ---------------------------------------------------------------------------
// Linear bandits
// ---------------------------------------------------------------------------

enum class ActionSetKind { finite, unit_ball, hypercube_vertices };

// Action set of a linear bandit. Finite sets hold their points as columns.
// Hypercube vertices are scaled by 1/sqrt(d) so that every action has unit norm.
struct ActionSet {
  ActionSetKind kind = ActionSetKind::finite;
  int dim = 0;
  Eigen::MatrixXd points;  // only for kind == finite

  static ActionSet finite(Eigen::MatrixXd pts) {
    ActionSet s;
    s.kind = ActionSetKind::finite;
    s.dim = static_cast<int>(pts.rows());
    s.points = std::move(pts);
    if (s.dim < 1 || s.points.cols() < 1) throw InvalidArgument("finite action set must be nonempty");
    for (Eigen::Index j = 0; j < s.points.cols(); ++j) {
      if (s.points.col(j).norm() > 1.0 + kNormSlack) {
        throw InvalidAction("action " + std::to_string(j) + " has norm above 1");
      }
    }
    return s;
  }
  static ActionSet unit_ball(int d) {
    if (d < 1) throw InvalidArgument("dimension must be positive");
    ActionSet s;
    s.kind = ActionSetKind::unit_ball;
    s.dim = d;
    return s;
  }
  static ActionSet hypercube_vertices(int d) {
    if (d < 1 || d > 20) throw InvalidArgument("hypercube dimension must be in [1,20]");
    ActionSet s;
    s.kind = ActionSetKind::hypercube_vertices;
    s.dim = d;
    return s;
  }

  bool is_finite() const noexcept { return kind != ActionSetKind::unit_ball; }

  // Points of a finite or hypercube set. Unit balls have no finite listing.
  Eigen::MatrixXd enumerate() const {
    switch (kind) {
      case ActionSetKind::finite:
        return points;
      case ActionSetKind::hypercube_vertices: {
        const Eigen::Index n = Eigen::Index{1} << dim;
        Eigen::MatrixXd out(dim, n);
        const double s = 1.0 / std::sqrt(static_cast<double>(dim));
        for (Eigen::Index v = 0; v < n; ++v) {
          for (int k = 0; k < dim; ++k) out(k, v) = ((v >> k) & 1) ? s : -s;
        }
        return out;
      }
      case ActionSetKind::unit_ball:
        break;
    }
    throw InvalidArgument("unit ball has no finite enumeration; build a net instead");
  }
};

class LinearEnvironment {
 public:
  LinearEnvironment(Eigen::VectorXd theta, ActionSet actions, double noise_sigma = 1.0)
      : theta_(std::move(theta)), actions_(std::move(actions)), sigma_(noise_sigma) {
    if (theta_.size() != actions_.dim) throw InvalidArgument("theta and action set dimensions differ");
    if (theta_.norm() > 1.0 + kNormSlack) throw InvalidArgument("theta must have norm at most 1");
    if (!(sigma_ >= 0.0 && sigma_ <= 1.0)) throw InvalidArgument("noise sigma must lie in [0,1]");
  }

  int dim() const noexcept { return actions_.dim; }
  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  const ActionSet& actions() const noexcept { return actions_; }
  double noise_sigma() const noexcept { return sigma_; }

  double mean_reward(const Eigen::Ref<const Eigen::VectorXd>& action) const {
    return theta_.dot(action);
  }

 private:
  Eigen::VectorXd theta_;
  ActionSet actions_;
  double sigma_;
};

// Gaussian noise stream of one execution; draw t is a function of (seed, t).
class LinearRewardStream {
 public:
  explicit LinearRewardStream(RewardSeed seed)
      : engine_(detail::combine(detail::mix64(seed.value ^ 0x3C3C3C3CULL), 0x11)) {}

  double noise(double sigma) {
    if (sigma == 0.0) return 0.0;
    return sigma * normal_(engine_);
  }
  std::uint64_t draws() const noexcept { return engine_.position(); }

 private:
  CounterEngine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline void check_action(const LinearEnvironment& env, const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() != env.dim()) throw InvalidAction("action dimension mismatch");
  if (a.norm() > 1.0 + kNormSlack) throw InvalidAction("action norm exceeds 1");
}

inline double pull_linear(const LinearEnvironment& env, const Eigen::Ref<const Eigen::VectorXd>& action,
                          LinearRewardStream& stream) {
  check_action(env, action);
  return env.mean_reward(action) + stream.noise(env.noise_sigma());
}

// Sum of `count` independent rewards of one action. The Gaussian sum is drawn
// in closed form, which is exact in distribution and O(1) in `count`.
inline double pull_linear_sum(const LinearEnvironment& env, const Eigen::Ref<const Eigen::VectorXd>& action,
                              std::uint64_t count, LinearRewardStream& stream) {
  check_action(env, action);
  const double n = static_cast<double>(count);
  return n * env.mean_reward(action) + std::sqrt(n) * stream.noise(env.noise_sigma());
}

}  // namespace reprobandit

#endif
