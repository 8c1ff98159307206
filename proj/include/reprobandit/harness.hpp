#ifndef REPROBANDIT_HARNESS_HPP
#define REPROBANDIT_HARNESS_HPP

// Paired executions, reproducibility certification, pseudo-regret and sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <Eigen/Dense>

#include "reprobandit/environments.hpp"
#include "reprobandit/errors.hpp"
#include "reprobandit/linear_policies.hpp"
#include "reprobandit/mab_policies.hpp"
#include "reprobandit/trace.hpp"

namespace reprobandit {

enum class PolicyId { etc, alg1, alg2, alg3, alg4 };

inline const char* policy_name(PolicyId p) {
  switch (p) {
    case PolicyId::etc: return "etc";
    case PolicyId::alg1: return "alg1";
    case PolicyId::alg2: return "alg2";
    case PolicyId::alg3: return "alg3";
    case PolicyId::alg4: return "alg4";
  }
  return "?";
}

inline PolicyId parse_policy(const std::string& s) {
  for (PolicyId p : {PolicyId::etc, PolicyId::alg1, PolicyId::alg2, PolicyId::alg3, PolicyId::alg4}) {
    if (s == policy_name(p)) return p;
  }
  throw ConfigError("unknown policy '" + s + "'");
}

using Environment = std::variant<MabEnvironment, LinearEnvironment>;

struct PolicyParams {
  std::optional<double> known_gap;              // explore-then-commit; defaults to the smallest positive gap
  std::optional<std::uint64_t> beta_override;   // alg2 / alg3
  Alg4Options alg4;
  RunOptions run{false, true};
};

struct ExperimentConfig {
  PolicyId policy = PolicyId::alg2;
  Environment env = MabEnvironment({0.5});
  std::string env_id = "env";
  std::uint64_t horizon = 1000;
  double rho = 0.5;
  std::size_t runs = 30;
  std::uint64_t shared_base = 1;
  std::uint64_t reward_base = 1000003;
  PolicyParams params;
};

inline void validate(const ExperimentConfig& c) {
  if (!(c.rho > 0.0 && c.rho <= 1.0)) throw ConfigError("rho must lie in (0,1]");
  if (c.horizon == 0) throw ConfigError("horizon must be positive");
  const bool linear = std::holds_alternative<LinearEnvironment>(c.env);
  const bool wants_linear = c.policy == PolicyId::alg3 || c.policy == PolicyId::alg4;
  if (linear != wants_linear) {
    throw ConfigError(std::string("policy ") + policy_name(c.policy) + " does not match the environment kind");
  }
}

inline double smallest_gap(const MabEnvironment& env) {
  double g = 1.0;
  bool any = false;
  for (double x : gap_profile(env).gaps) {
    if (x > 0.0 && (!any || x < g)) {
      g = x;
      any = true;
    }
  }
  return g;
}

// Pair k shares seed base+k; its two executions draw rewards from base+2k and base+2k+1.
inline Seeds pair_seeds(const ExperimentConfig& c, std::uint64_t pair, int side) {
  return {SharedSeed{c.shared_base + pair}, RewardSeed{c.reward_base + 2 * pair + static_cast<std::uint64_t>(side)}};
}

inline ExecutionTrace run_policy(const ExperimentConfig& c, const Seeds& seeds) {
  validate(c);
  const RunOptions& o = c.params.run;
  switch (c.policy) {
    case PolicyId::etc: {
      const auto& env = std::get<MabEnvironment>(c.env);
      return run_etc(env, c.horizon, c.rho, c.params.known_gap.value_or(smallest_gap(env)), seeds, o);
    }
    case PolicyId::alg1:
      return run_alg1(std::get<MabEnvironment>(c.env), c.horizon, c.rho, seeds, o);
    case PolicyId::alg2:
      return run_alg2(std::get<MabEnvironment>(c.env), c.horizon, c.rho, seeds, o, c.params.beta_override);
    case PolicyId::alg3:
      return run_alg3(std::get<LinearEnvironment>(c.env), c.horizon, c.rho, seeds, o,
                      Alg3Options{c.params.beta_override, 1.0});
    case PolicyId::alg4:
      return run_alg4(std::get<LinearEnvironment>(c.env), c.horizon, c.rho, seeds, o, c.params.alg4);
  }
  throw ConfigError("unknown policy");
}

// Runs fn(0..n-1) on a pool of worker threads. Every index owns its own
// result slot, so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct PairedRunReport {
  bool identical = false;
  std::optional<std::uint64_t> first_divergence;
  ExecutionTrace first, second;
};

inline PairedRunReport run_paired(const ExperimentConfig& c, std::uint64_t pair = 0) {
  PairedRunReport r;
  r.first = run_policy(c, pair_seeds(c, pair, 0));
  r.second = run_policy(c, pair_seeds(c, pair, 1));
  r.first_divergence = first_divergence(r.first, r.second);
  r.identical = !r.first_divergence.has_value();
  return r;
}

// Lower end of the two-sided 95% Clopper-Pearson interval, i.e. the one-sided
// 97.5% lower confidence bound. At n/n successes it equals 0.025^(1/n).
inline double clopper_pearson_lower(std::size_t successes, std::size_t n, double alpha = 0.05) {
  if (n == 0 || successes > n) throw InvalidArgument("need 0 <= successes <= n, n > 0");
  if (successes == 0) return 0.0;
  return boost::math::ibeta_inv(static_cast<double>(successes), static_cast<double>(n - successes + 1), alpha / 2.0);
}

struct ReproEstimate {
  std::size_t pairs = 0;
  std::size_t identical = 0;
  double rate = 0.0;
  double lower_bound = 0.0;
  std::vector<std::optional<std::uint64_t>> first_divergence;  // per pair
  std::vector<double> pair_regret;                             // mean of the two executions, per pair
};

inline double pseudo_regret(const ExecutionTrace& trace, const MabEnvironment& env) {
  const auto n = trace.pull_counts(env.arms());
  double r = 0.0;
  for (std::size_t a = 0; a < n.size(); ++a) r += static_cast<double>(n[a]) * (env.best_mean() - env.mean(a));
  return r;
}

// Linear pseudo-regret against mu_star, with arm ids indexing the columns of `points`.
inline double pseudo_regret(const ExecutionTrace& trace, const LinearEnvironment& env, const Eigen::MatrixXd& points,
                            double mu_star) {
  double r = 0.0;
  for (const auto& s : trace.segments()) {
    if (s.arm >= points.cols()) throw InvalidArm("trace refers to a missing action");
    r += static_cast<double>(s.count) * (mu_star - env.mean_reward(points.col(s.arm)));
  }
  return r;
}

// Points that the trace's arm ids refer to, for linear policies.
inline Eigen::MatrixXd policy_points(const ExperimentConfig& c) {
  const auto& env = std::get<LinearEnvironment>(c.env);
  if (c.policy == PolicyId::alg4) {
    const double eta = c.params.alg4.net_eta > 0.0 ? c.params.alg4.net_eta : coarse_net_eta(c.horizon, env.dim());
    return build_net(env.actions(), eta, c.params.alg4.net_cap).points;
  }
  return env.actions().enumerate();
}

// Best mean over the whole action set (the unit ball's is ||theta||).
inline double best_linear_mean(const LinearEnvironment& env) {
  if (env.actions().kind == ActionSetKind::unit_ball) return env.theta().norm();
  return (env.theta().transpose() * env.actions().enumerate()).maxCoeff();
}

struct RegretEvaluator {
  std::function<double(const ExecutionTrace&)> fn;
  double operator()(const ExecutionTrace& t) const { return fn(t); }
};

inline RegretEvaluator regret_evaluator(const ExperimentConfig& c) {
  if (const auto* mab = std::get_if<MabEnvironment>(&c.env)) {
    MabEnvironment env = *mab;
    return {[env](const ExecutionTrace& t) { return pseudo_regret(t, env); }};
  }
  const auto& env = std::get<LinearEnvironment>(c.env);
  Eigen::MatrixXd pts = policy_points(c);
  const double best = best_linear_mean(env);
  return {[env, pts, best](const ExecutionTrace& t) { return pseudo_regret(t, env, pts, best); }};
}

inline ReproEstimate estimate_repro_rate(const ExperimentConfig& c, std::size_t n_pairs, unsigned threads = 0) {
  if (n_pairs == 0) throw InvalidArgument("need at least one pair");
  validate(c);
  const RegretEvaluator regret = regret_evaluator(c);
  std::vector<std::optional<std::uint64_t>> div(n_pairs);
  std::vector<double> reg(n_pairs);
  parallel_for(
      n_pairs,
      [&](std::size_t k) {
        const PairedRunReport r = run_paired(c, k);
        div[k] = r.first_divergence;
        reg[k] = 0.5 * (regret(r.first) + regret(r.second));
      },
      threads);
  ReproEstimate e;
  e.pairs = n_pairs;
  e.identical = static_cast<std::size_t>(std::count_if(div.begin(), div.end(), [](const auto& x) { return !x; }));
  e.rate = static_cast<double>(e.identical) / static_cast<double>(n_pairs);
  e.lower_bound = clopper_pearson_lower(e.identical, n_pairs);
  e.first_divergence = std::move(div);
  e.pair_regret = std::move(reg);
  return e;
}

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 sd / sqrt(n)
};

inline MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

struct RegretCurve {
  std::vector<std::uint64_t> horizons;
  std::vector<double> mean_pseudo_regret;
  std::vector<double> ci_halfwidth;
  std::size_t runs_per_point = 0;
};

// Independent runs per horizon: run k uses shared seed base+k and reward seed base+2k.
inline RegretCurve regret_curve(ExperimentConfig c, const std::vector<std::uint64_t>& horizons, std::size_t runs,
                                unsigned threads = 0) {
  RegretCurve out;
  out.runs_per_point = runs;
  for (std::uint64_t t : horizons) {
    c.horizon = t;
    validate(c);
    const RegretEvaluator regret = regret_evaluator(c);
    std::vector<double> r(runs);
    parallel_for(
        runs, [&](std::size_t k) { r[k] = regret(run_policy(c, pair_seeds(c, k, 0))); }, threads);
    const MeanCi m = mean_ci(r);
    out.horizons.push_back(t);
    out.mean_pseudo_regret.push_back(m.mean);
    out.ci_halfwidth.push_back(m.half_width);
  }
  return out;
}

struct SweepRow {
  std::string policy;
  std::uint64_t horizon = 0;
  double rho = 0.0;
  std::string env_id;
  double mean_regret = std::nan("");
  double ci = std::nan("");
  double agreement = std::nan("");
  double agreement_lower = std::nan("");
  std::size_t pairs = 0;
  std::string error;  // empty on success
};

// One row per config, in input order. A failing config leaves its metrics
// empty and records the error message.
inline std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs, unsigned threads = 0) {
  if (configs.empty()) throw ConfigError("sweep needs at least one config");
  std::vector<SweepRow> rows;
  for (const auto& c : configs) {
    SweepRow row;
    row.policy = policy_name(c.policy);
    row.horizon = c.horizon;
    row.rho = c.rho;
    row.env_id = c.env_id;
    row.pairs = c.runs;
    try {
      const ReproEstimate e = estimate_repro_rate(c, c.runs, threads);
      const MeanCi m = mean_ci(e.pair_regret);
      row.mean_regret = m.mean;
      row.ci = m.half_width;
      row.agreement = e.rate;
      row.agreement_lower = e.lower_bound;
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace reprobandit

#endif
