#ifndef REPROBANDIT_MAB_POLICIES_HPP
#define REPROBANDIT_MAB_POLICIES_HPP

// Reproducible K-armed policies: explore-then-commit with a known gap, batched
// elimination on top of reproducible mean estimates, and batched elimination
// with a randomly drawn threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "reprobandit/environments.hpp"
#include "reprobandit/errors.hpp"
#include "reprobandit/repro_sq.hpp"
#include "reprobandit/shared_randomness.hpp"
#include "reprobandit/trace.hpp"

namespace reprobandit {

struct Seeds {
  SharedSeed shared;
  RewardSeed reward;
};

inline constexpr std::uint64_t kMinBlowUp = 2304;

// Number of batches for horizon T: ln T rounded to the nearest integer, at least 1.
inline std::size_t batch_count(std::uint64_t horizon) {
  if (horizon < 2) return 1;
  const auto b = static_cast<std::size_t>(std::llround(std::log(static_cast<double>(horizon))));
  return std::max<std::size_t>(b, 1);
}

// floor(max{K^2 / rho^2, 2304})
inline std::uint64_t blow_up(std::size_t arms, double rho) {
  const double k = static_cast<double>(arms);
  const double ratio = k * k / (rho * rho);
  return static_cast<std::uint64_t>(std::floor(std::max(ratio * (1.0 + 1e-12), static_cast<double>(kMinBlowUp))));
}

// floor(q^i) guarded against q^i landing a hair below an integer.
inline std::uint64_t floor_power(double q, std::size_t i) {
  return static_cast<std::uint64_t>(std::floor(std::pow(q, static_cast<double>(i)) * (1.0 + 1e-12)));
}

struct BatchSchedule {
  std::uint64_t horizon = 0;
  std::size_t batches = 1;  // B; batches 1..B-1 are scheduled
  double growth = 1.0;      // q
  std::uint64_t beta = 1;
  std::vector<std::uint64_t> base_pulls;  // base_pulls[i-1] = floor(q^i)
  std::vector<std::uint64_t> cumulative;  // cumulative[i-1] = c_i

  std::uint64_t base(std::size_t i) const { return base_pulls.at(i - 1); }
  std::uint64_t c(std::size_t i) const { return cumulative.at(i - 1); }

  // Batches that fit under the break rule with `arms` arms all kept active.
  std::size_t batches_that_fit(std::size_t arms) const {
    std::uint64_t left = horizon;
    std::size_t n = 0;
    for (std::uint64_t b : base_pulls) {
      const std::uint64_t need = beta * b * arms;
      if (need > left) break;
      left -= need;
      ++n;
    }
    return n;
  }
};

inline BatchSchedule batch_plan(std::uint64_t horizon, std::size_t arms, double rho,
                                std::optional<std::uint64_t> beta_override = std::nullopt) {
  if (horizon < 2) throw InvalidArgument("batch_plan needs T >= 2");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0,1]");
  BatchSchedule s;
  s.horizon = horizon;
  s.batches = batch_count(horizon);
  s.growth = std::pow(static_cast<double>(horizon), 1.0 / static_cast<double>(s.batches));
  s.beta = beta_override ? *beta_override : blow_up(arms, rho);
  std::uint64_t c = 0;
  for (std::size_t i = 1; i < s.batches; ++i) {
    const std::uint64_t b = floor_power(s.growth, i);
    c += b;
    s.base_pulls.push_back(b);
    s.cumulative.push_back(c);
  }
  return s;
}

struct ConfidenceRadii {
  double u = 0.0;        // radius without the blow-up
  double u_tilde = 0.0;  // radius of the blown-up sample
  double u_bar = 0.0;    // shared random threshold in [u/2, u]
};

// ln(1/delta) with delta = 1/(2KTB), floored.
inline double alg2_log_term(std::size_t arms, std::uint64_t horizon, std::size_t batches) {
  const double delta = 1.0 / (2.0 * static_cast<double>(arms) * static_cast<double>(horizon) *
                              static_cast<double>(batches));
  return std::log(1.0 / clamp_delta(delta));
}

inline ConfidenceRadii alg2_radii(const BatchSchedule& s, std::size_t i, std::size_t arms, SharedSeed seed) {
  const double log_term = alg2_log_term(arms, s.horizon, s.batches);
  const double c = static_cast<double>(s.c(i));
  ConfidenceRadii r;
  r.u = std::sqrt(2.0 * log_term / c);
  r.u_tilde = std::sqrt(2.0 * log_term / (static_cast<double>(s.beta) * c));
  r.u_bar = draw_uniform(seed, {Purpose::threshold, i, 0}, r.u / 2.0, r.u);
  return r;
}

struct EliminationState {
  std::vector<ArmId> active;       // increasing arm ids
  std::vector<double> estimates;   // indexed by arm id
  std::vector<std::uint64_t> pull_counts;
  std::size_t batch_index = 0;

  explicit EliminationState(std::size_t arms) : estimates(arms, 0.0), pull_counts(arms, 0) {
    active.reserve(arms);
    for (std::size_t a = 0; a < arms; ++a) active.push_back(static_cast<ArmId>(a));
  }

  // Empirical best among active arms; ties go to the lowest id.
  ArmId leader() const {
    ArmId best = active.front();
    for (ArmId a : active) {
      if (estimates[a] > estimates[best]) best = a;
    }
    return best;
  }
  double max_estimate() const { return estimates[leader()]; }
};

// Removes every active arm with estimate + u_tilde < max - u_bar. The leader
// can never satisfy the strict inequality since both radii are positive.
inline std::vector<ArmId> eliminate_alg2(EliminationState& state, const ConfidenceRadii& radii) {
  const double cut = state.max_estimate() - radii.u_bar;
  std::vector<ArmId> removed, kept;
  for (ArmId a : state.active) {
    (state.estimates[a] + radii.u_tilde < cut ? removed : kept).push_back(a);
  }
  state.active = std::move(kept);
  return removed;
}

namespace detail {

struct MabRunner {
  const MabEnvironment& env;
  MabRewardStream stream;
  const RunOptions& options;
  ExecutionTrace trace;
  std::vector<SampleStats> stats;

  MabRunner(const MabEnvironment& e, RewardSeed seed, const RunOptions& opts)
      : env(e), stream(seed), options(opts), stats(e.arms()) {}

  void pull(ArmId arm, std::uint64_t times) {
    SampleStats& s = stats[arm];
    if (options.record_rewards) {
      for (std::uint64_t k = 0; k < times; ++k) {
        const double r = stream.pull(env, arm);
        s.add(r);
        trace.rewards.push_back(r);
      }
    } else {
      for (std::uint64_t k = 0; k < times; ++k) s.add(stream.pull(env, arm));
    }
    trace.append(arm, times);
  }

  // Rewards after the last decision are only drawn when they are recorded.
  void commit(ArmId arm, std::uint64_t remaining) {
    trace.committed_arm = arm;
    if (options.record_rewards) {
      pull(arm, remaining);
    } else {
      trace.append(arm, remaining);
    }
  }
};

inline void check_mab_inputs(const MabEnvironment& env, std::uint64_t horizon, double rho) {
  if (horizon < env.arms()) throw InvalidArgument("horizon must be at least the number of arms");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0,1]");
}

}  // namespace detail

// Explore-then-commit with a known minimum gap: m = ceil(4 ln(1/rho) / gap^2)
// round-robin rounds, then the empirical best arm for the rest of the horizon.
inline std::uint64_t etc_exploration_rounds(double rho, double gap) {
  return static_cast<std::uint64_t>(std::ceil(4.0 / (gap * gap) * std::log(1.0 / rho)));
}

inline ExecutionTrace run_etc(const MabEnvironment& env, std::uint64_t horizon, double rho, double gap,
                              const Seeds& seeds, const RunOptions& options = {}) {
  if (!(gap > 0.0 && gap <= 1.0)) throw InvalidArgument("known gap must lie in (0,1]");
  detail::check_mab_inputs(env, horizon, rho);
  const std::uint64_t m = etc_exploration_rounds(rho, gap);
  const std::size_t k = env.arms();
  if (m * k > horizon) throw HorizonTooSmall("exploration phase does not fit in the horizon");

  detail::MabRunner run(env, seeds.reward, options);
  for (std::uint64_t round = 0; round < m; ++round) {
    for (std::size_t a = 0; a < k; ++a) run.pull(static_cast<ArmId>(a), 1);
  }
  ArmId best = 0;
  for (std::size_t a = 1; a < k; ++a) {
    if (run.stats[a].mean() > run.stats[best].mean()) best = static_cast<ArmId>(a);
  }
  run.commit(best, horizon - m * k);
  return std::move(run.trace);
}

// Batched elimination driven by reproducible mean estimates. Each batch asks
// the estimator for accuracy tau_i = min{1, sqrt(ln(2KTB)/c_i)} at budget
// rho/(KB), and tops every active arm up to the sample count that request
// needs. Arms below max - 2 tau_i are dropped.
inline ExecutionTrace run_alg1(const MabEnvironment& env, std::uint64_t horizon, double rho, const Seeds& seeds,
                               const RunOptions& options = {}) {
  detail::check_mab_inputs(env, horizon, rho);
  const std::size_t k = env.arms();
  const BatchSchedule sched = batch_plan(std::max<std::uint64_t>(horizon, 2), k, rho, 1);
  const double delta = clamp_delta(1.0 / (2.0 * k * static_cast<double>(horizon) * sched.batches));
  const double log_term = std::log(1.0 / delta);
  const double rho_call = rho / (static_cast<double>(k) * sched.batches);

  detail::MabRunner run(env, seeds.reward, options);
  EliminationState state(k);
  std::uint64_t remaining = horizon;
  std::uint64_t per_arm = 0;  // every active arm has the same count

  for (std::size_t i = 1; i < sched.batches; ++i) {
    const double tau = std::min(1.0, std::sqrt(log_term / static_cast<double>(sched.c(i))));
    SqRequest req{tau, rho_call, delta, {Purpose::grid_offset, i, 0}};
    const std::uint64_t need = required_samples(req);
    const std::uint64_t extra = need > per_arm ? need - per_arm : 0;
    if (extra * state.active.size() > remaining) break;

    for (ArmId a : state.active) run.pull(a, extra);
    per_arm += extra;
    remaining -= extra * state.active.size();
    for (ArmId a : state.active) {
      req.key.arm_index = a;
      state.estimates[a] = repro_mean(run.stats[a], req, seeds.shared);
      state.pull_counts[a] = run.stats[a].count;
    }
    state.batch_index = i;

    BatchRecord rec;
    if (options.record_batches) {
      rec.index = i;
      rec.active = state.active.size();
      rec.pulls = extra * state.active.size();
      rec.radius = tau;
      rec.arms = state.active;
      for (ArmId a : state.active) rec.estimates.push_back(state.estimates[a]);
    }
    const double cut = state.max_estimate() - 2.0 * tau;
    std::vector<ArmId> kept;
    for (ArmId a : state.active) {
      if (state.estimates[a] < cut) {
        rec.eliminated.push_back(a);
      } else {
        kept.push_back(a);
      }
    }
    state.active = std::move(kept);
    if (options.record_batches) run.trace.batches.push_back(std::move(rec));
  }
  run.commit(state.leader(), remaining);
  return std::move(run.trace);
}

// Batched elimination with blow-up beta and a shared random threshold U-bar_i.
inline ExecutionTrace run_alg2(const MabEnvironment& env, std::uint64_t horizon, double rho, const Seeds& seeds,
                               const RunOptions& options = {},
                               std::optional<std::uint64_t> beta_override = std::nullopt) {
  detail::check_mab_inputs(env, horizon, rho);
  const std::size_t k = env.arms();
  const BatchSchedule sched = batch_plan(std::max<std::uint64_t>(horizon, 2), k, rho, beta_override);

  detail::MabRunner run(env, seeds.reward, options);
  EliminationState state(k);
  std::uint64_t remaining = horizon;
  std::size_t completed = 0;

  for (std::size_t i = 1; i < sched.batches; ++i) {
    const std::uint64_t per_arm = sched.beta * sched.base(i);
    if (per_arm * state.active.size() > remaining) break;

    for (ArmId a : state.active) {
      run.pull(a, per_arm);
      state.estimates[a] = run.stats[a].mean();
      state.pull_counts[a] = run.stats[a].count;
    }
    state.batch_index = i;
    const ConfidenceRadii radii = alg2_radii(sched, i, k, seeds.shared);
    remaining -= per_arm * state.active.size();

    BatchRecord rec;
    if (options.record_batches) {
      rec.index = i;
      rec.active = state.active.size();
      rec.pulls = per_arm * state.active.size();
      rec.radius = radii.u;
      rec.radius_tilde = radii.u_tilde;
      rec.threshold = radii.u_bar;
      rec.arms = state.active;
      for (ArmId a : state.active) rec.estimates.push_back(state.estimates[a]);
    }
    rec.eliminated = eliminate_alg2(state, radii);
    if (options.record_batches) run.trace.batches.push_back(std::move(rec));
    ++completed;
  }
  if (completed == 0) throw HorizonTooSmall("no full batch fits in the horizon");
  run.commit(state.leader(), remaining);
  return std::move(run.trace);
}

// Number of distinct batches in which each arm's estimate sat inside the
// region [max - U - 5U~, max - U/2 + 3U~] where the random threshold decides
// its fate. Reads the batch log of a run_alg2 trace.
inline std::map<ArmId, std::size_t> bad_region_batches(const ExecutionTrace& trace) {
  std::map<ArmId, std::size_t> hits;
  for (const BatchRecord& b : trace.batches) {
    if (b.estimates.empty()) continue;
    const double top = *std::max_element(b.estimates.begin(), b.estimates.end());
    const double lo = top - b.radius - 5.0 * b.radius_tilde;
    const double hi = top - b.radius / 2.0 + 3.0 * b.radius_tilde;
    for (std::size_t j = 0; j < b.arms.size(); ++j) {
      if (b.estimates[j] >= lo && b.estimates[j] <= hi) ++hits[b.arms[j]];
    }
  }
  return hits;
}

}  // namespace reprobandit

#endif
