#ifndef REPROBANDIT_LINEAR_POLICIES_HPP
#define REPROBANDIT_LINEAR_POLICIES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "reprobandit/environments.hpp"
#include "reprobandit/errors.hpp"
#include "reprobandit/mab_policies.hpp"
#include "reprobandit/optimal_design.hpp"
#include "reprobandit/repro_sq.hpp"
#include "reprobandit/shared_randomness.hpp"
#include "reprobandit/trace.hpp"

namespace reprobandit {

inline constexpr double kIllConditioned = 1e12;
inline constexpr std::size_t kDefaultNetCap = 1000000;

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

// `count` pulls of one action whose rewards add up to `sum`.
struct GroupedPulls {
  Eigen::VectorXd action;
  std::uint64_t count = 0;
  double sum = 0.0;
};

struct LseResult {
  Eigen::VectorXd theta;
  double condition = 1.0;  // ratio of extreme eigenvalues of V
  bool ill_conditioned = false;
};

inline LseResult least_squares(std::span<const GroupedPulls> pulls) {
  if (pulls.empty()) throw SingularDesign("no pulls");
  const Eigen::Index d = pulls.front().action.size();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (const auto& p : pulls) {
    if (p.action.size() != d) throw InvalidArgument("pulls of mixed dimension");
    const double n = static_cast<double>(p.count);
    v.noalias() += n * p.action * p.action.transpose();
    b += p.sum * p.action;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= 1e-13 * hi) throw SingularDesign("pulled actions do not span");
  LseResult out;
  out.condition = hi / lo;
  out.ill_conditioned = out.condition > kIllConditioned;
  out.theta = v.ldlt().solve(b);
  return out;
}

// One (action, reward) pair per pull.
inline LseResult least_squares(const Eigen::MatrixXd& actions, const Eigen::VectorXd& rewards) {
  if (actions.cols() != rewards.size()) throw InvalidArgument("one reward per action column");
  std::vector<GroupedPulls> g;
  g.reserve(static_cast<std::size_t>(actions.cols()));
  for (Eigen::Index j = 0; j < actions.cols(); ++j) g.push_back({actions.col(j), 1, rewards[j]});
  return least_squares(g);
}

// ---------------------------------------------------------------------------
// Nets
// ---------------------------------------------------------------------------

struct NetSpec {
  ActionSet base;
  double resolution = 1.0;
  Eigen::MatrixXd points;  // d x N
  std::size_t size() const noexcept { return static_cast<std::size_t>(points.cols()); }
};

// Coarse resolution T^{-1/(4d+2)}.
inline double coarse_net_eta(std::uint64_t horizon, int d) {
  return std::pow(static_cast<double>(horizon), -1.0 / (4.0 * d + 2.0));
}

// Finite and hypercube sets come back verbatim. The unit ball is covered by
// the axis lattice of pitch eta/sqrt(d) cut to the ball: truncating each
// coordinate of a ball point toward zero lands on a lattice point inside the
// ball at distance at most eta.
inline NetSpec build_net(const ActionSet& base, double eta, std::size_t cap = kDefaultNetCap) {
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("net resolution must lie in (0,1]");
  NetSpec net{base, eta, {}};
  if (base.is_finite()) {
    net.points = base.enumerate();
    if (net.size() > cap) throw NetTooLarge("action set exceeds the net size cap");
    return net;
  }
  const int d = base.dim;
  const double h = eta / std::sqrt(static_cast<double>(d));
  const auto m = static_cast<long long>(std::floor(1.0 / h + 1e-9));
  const double per_axis = static_cast<double>(2 * m + 1);
  const double ball_volume = std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
  const double projected = std::min(std::pow(per_axis, d), ball_volume / std::pow(h, d) + std::pow(per_axis, d - 1) * 2 * d);
  if (projected > static_cast<double>(cap)) {
    throw NetTooLarge("unit-ball net would hold about " + std::to_string(static_cast<long long>(projected)) +
                      " points; use a coarser resolution such as T^(-1/(4d+2))");
  }
  std::vector<Eigen::VectorXd> pts;
  std::vector<long long> idx(static_cast<std::size_t>(d), -m);
  for (;;) {
    Eigen::VectorXd p(d);
    for (int k = 0; k < d; ++k) p[k] = static_cast<double>(idx[static_cast<std::size_t>(k)]) * h;
    if (p.squaredNorm() <= 1.0 + 1e-12) pts.push_back(p);
    int k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] > m) idx[static_cast<std::size_t>(k++)] = -m;
    if (k == d) break;
  }
  if (pts.size() > cap) throw NetTooLarge("unit-ball net exceeds the size cap");
  net.points.resize(d, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) net.points.col(static_cast<Eigen::Index>(j)) = pts[j];
  return net;
}

// ---------------------------------------------------------------------------
// Reproducible least squares
// ---------------------------------------------------------------------------

struct ReproLseResult {
  Eigen::VectorXd theta;
  std::vector<double> values;          // rounded mean v(a) per core arm
  std::vector<std::uint64_t> counts;   // n_a per core arm
  double spacing = 0.0;                // grid spacing tau / (11 d)
};

struct ReproLseParams {
  double rho = 0.1;
  double delta = 0.01;
  double tau = 0.1;
  std::uint64_t batch = 0;
  double variance_proxy = 1.0;
};

inline SqRequest repro_lse_request(const ReproLseParams& p, int d, std::size_t core, std::size_t j) {
  const double m = static_cast<double>(core);
  return SqRequest{p.tau / (11.0 * d), p.rho / m, p.delta / (2.0 * m),
                   {Purpose::grid_offset, p.batch, static_cast<std::uint64_t>(j)}, p.variance_proxy};
}

// Per-arm sample requirement for a core set of the given size.
inline std::uint64_t repro_lse_samples(const ReproLseParams& p, int d, std::size_t core) {
  return required_samples(repro_lse_request(p, d, core, 0));
}

// theta_SQ = V^{-1} sum_a a n_a v(a) with V = sum_a n_a a a^T, where v(a) is a
// reproducible mean of arm a's rewards.
inline ReproLseResult reproducible_lse(const Design& core, std::span<const SampleStats> stats,
                                       const ReproLseParams& p, SharedSeed seed) {
  const std::size_t m = core.size();
  if (stats.size() != m) throw InvalidArgument("one sample summary per core arm");
  const int d = core.dim();
  ReproLseResult out;
  out.spacing = p.tau / (11.0 * d);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < m; ++j) {
    const double val = repro_mean(stats[j], repro_lse_request(p, d, m, j), seed);
    const Eigen::VectorXd a = core.support.col(static_cast<Eigen::Index>(j));
    const double n = static_cast<double>(stats[j].count);
    v.noalias() += n * a * a.transpose();
    b += (n * val) * a;
    out.values.push_back(val);
    out.counts.push_back(stats[j].count);
  }
  out.theta = detail::factor_spd(v).solve(b);
  return out;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

namespace detail {

// Orthonormal basis of the span of `arms` (identity when they span).
inline Eigen::MatrixXd span_basis(const Eigen::MatrixXd& arms) {
  const Eigen::Index d = arms.rows();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(arms);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  if (r == d) return Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.leftCols(r);
}

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& pts, const std::vector<ArmId>& ids) {
  Eigen::MatrixXd out(pts.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = pts.col(ids[j]);
  return out;
}

struct LinearRunner {
  const LinearEnvironment& env;
  LinearRewardStream stream;
  const RunOptions& options;
  ExecutionTrace trace;

  LinearRunner(const LinearEnvironment& e, RewardSeed seed, const RunOptions& opts)
      : env(e), stream(seed), options(opts) {}

  // Sum of `count` rewards of one action. Rewards are drawn one by one only
  // when the run records them; otherwise the sum is drawn in closed form.
  double pull(ArmId id, const Eigen::VectorXd& action, std::uint64_t count) {
    trace.append(id, count);
    if (!options.record_rewards) return pull_linear_sum(env, action, count, stream);
    double s = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) {
      const double r = pull_linear(env, action, stream);
      trace.rewards.push_back(r);
      s += r;
    }
    return s;
  }

  void commit(ArmId id, const Eigen::VectorXd& action, std::uint64_t remaining) {
    trace.committed_arm = id;
    if (options.record_rewards) {
      pull(id, action, remaining);
    } else {
      check_action(env, action);
      trace.append(id, remaining);
    }
  }
};

inline ArmId leader_of(const std::vector<ArmId>& active, const std::vector<double>& est) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < active.size(); ++j) {
    if (est[j] > est[best]) best = j;
  }
  return active[best];
}

}  // namespace detail

struct Alg3Options {
  std::optional<std::uint64_t> beta_override;
  double schedule_constant = 1.0;  // c in q = (T/c)^{1/B}
};

// Batched elimination over a finite action set: each batch pulls the rounded
// G-optimal design of the surviving arms, fits least squares, and drops arms
// with <a,theta> + eps~_i < max - eps-bar_i. When the survivors stop spanning
// R^d the design and the fit move to their span.
inline ExecutionTrace run_alg3(const LinearEnvironment& env, std::uint64_t horizon, double rho, const Seeds& seeds,
                               const RunOptions& options = {}, const Alg3Options& alg = {}) {
  if (!env.actions().is_finite()) throw InvalidArgument("run_alg3 needs a finite action set");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0,1]");
  const Eigen::MatrixXd arms = env.actions().enumerate();
  const std::size_t k = static_cast<std::size_t>(arms.cols());
  if (horizon < 1) throw InvalidArgument("horizon must be positive");
  detail::LinearRunner run(env, seeds.reward, options);
  if (k == 1) {
    run.commit(0, arms.col(0), horizon);
    return std::move(run.trace);
  }
  if (!detail::spans(arms)) throw DegenerateArmSet("arms do not span the space");

  const double d = static_cast<double>(env.dim());
  const double t = static_cast<double>(horizon);
  const std::size_t batches = batch_count(horizon);
  const double q = std::pow(t / alg.schedule_constant, 1.0 / static_cast<double>(batches));
  const std::uint64_t beta = alg.beta_override ? *alg.beta_override : blow_up(k, rho);
  const double log_term = std::log(static_cast<double>(k) * t * t);
  const double delta = 1.0 / (static_cast<double>(k) * t * t);

  std::vector<ArmId> active(k);
  std::iota(active.begin(), active.end(), ArmId{0});
  std::vector<double> est(k, 0.0);
  std::uint64_t remaining = horizon;
  std::size_t completed = 0;

  for (std::size_t i = 1; i < batches && active.size() > 1; ++i) {
    const Eigen::MatrixXd pts = detail::columns(arms, active);
    const Eigen::MatrixXd basis = detail::span_basis(pts);
    if (basis.cols() == 0) break;
    const Eigen::MatrixXd z = basis.transpose() * pts;

    const double qi = std::pow(q, static_cast<double>(i));
    const double eps_tilde = std::sqrt(d * log_term / (static_cast<double>(beta) * qi));
    const double eps = std::sqrt(d * log_term / qi);

    const FrankWolfeResult fw = g_optimal_design(z, seeds.shared, i);
    const std::vector<std::uint64_t> counts = design_to_multiset(fw.design, eps_tilde, delta);
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total > remaining) break;

    std::vector<GroupedPulls> pulls;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const std::size_t local = fw.design.indices[j];
      const ArmId id = active[local];
      const double s = run.pull(id, arms.col(id), counts[j]);
      pulls.push_back({z.col(static_cast<Eigen::Index>(local)), counts[j], s});
    }
    remaining -= total;
    const LseResult lse = least_squares(pulls);
    const Eigen::VectorXd fitted = z.transpose() * lse.theta;
    const double eps_bar = draw_uniform(seeds.shared, {Purpose::threshold, i, 0}, eps / 2.0, eps);

    std::vector<double> local_est(fitted.data(), fitted.data() + fitted.size());
    const double top = *std::max_element(local_est.begin(), local_est.end());
    BatchRecord rec;
    rec.index = i;
    rec.active = active.size();
    rec.pulls = total;
    rec.radius = eps;
    rec.radius_tilde = eps_tilde;
    rec.threshold = eps_bar;
    rec.achieved_g = fw.g;
    rec.core_size = fw.design.size();
    rec.arms = active;
    rec.estimates = local_est;
    std::vector<ArmId> kept;
    for (std::size_t j = 0; j < active.size(); ++j) {
      est[active[j]] = local_est[j];
      (local_est[j] + eps_tilde < top - eps_bar ? rec.eliminated : kept).push_back(active[j]);
    }
    active = std::move(kept);
    if (options.record_batches) run.trace.batches.push_back(std::move(rec));
    ++completed;
  }
  if (completed == 0 && active.size() > 1) throw HorizonTooSmall("no full batch fits in the horizon");
  std::vector<double> active_est;
  for (ArmId a : active) active_est.push_back(est[a]);
  const ArmId best = detail::leader_of(active, active_est);
  run.commit(best, arms.col(best), remaining);
  return std::move(run.trace);
}

struct Alg4Options {
  double net_eta = 0.0;             // <= 0 selects T^{-1/(4d+2)}
  bool even_allocation = false;     // split ceil(M_i) evenly instead of by design weight
  std::size_t net_cap = kDefaultNetCap;
};

// M_i = q^i d^3 ln(max(d,2)) LL^2 LLL ln^2 T / rho^2 with LL = ln(ln max(d,2) + e),
// LLL = ln(LL + e).
inline double alg4_batch_budget(double qi, int d, double horizon, double rho) {
  const double dd = static_cast<double>(d);
  const double ld = std::log(std::max(dd, 2.0));
  const double ll = std::log(ld + M_E);
  const double lll = std::log(ll + M_E);
  const double lt = std::log(horizon);
  return qi * dd * dd * dd * ld * ll * ll * lll * lt * lt / (rho * rho);
}

// Per-batch accuracy handed to the reproducible least squares: the larger of
// the elimination radius (capped at 1) and the finest accuracy the batch's
// smallest per-arm sample supports.
inline double alg4_batch_tau(double eps, std::uint64_t n_min, const ReproLseParams& p, int d, std::size_t core) {
  const double m = static_cast<double>(core);
  const double afforded = 11.0 * d * supported_tau(n_min, p.rho / m, p.delta / (2.0 * m), p.variance_proxy);
  return std::max(std::min(eps, 1.0), afforded * (1.0 + 1e-9));
}

// Batched elimination over a net of the action set using reproducible least
// squares. Arm ids in the trace index the net points.
inline ExecutionTrace run_alg4(const LinearEnvironment& env, std::uint64_t horizon, double rho, const Seeds& seeds,
                               const RunOptions& options = {}, const Alg4Options& alg = {}) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0,1]");
  if (horizon < 2) throw InvalidArgument("horizon must be at least 2");
  const int d = env.dim();
  const double eta = alg.net_eta > 0.0 ? alg.net_eta : coarse_net_eta(horizon, d);
  const NetSpec net = build_net(env.actions(), eta, alg.net_cap);
  const Eigen::MatrixXd& pts_all = net.points;
  const std::size_t n_net = net.size();

  detail::LinearRunner run(env, seeds.reward, options);
  if (n_net == 1) {
    run.commit(0, pts_all.col(0), horizon);
    return std::move(run.trace);
  }

  const double t = static_cast<double>(horizon);
  const std::size_t batches = batch_count(horizon);
  const double q = std::pow(t, 1.0 / static_cast<double>(batches));
  ReproLseParams p;
  p.rho = rho / (static_cast<double>(d) * static_cast<double>(batches));
  p.delta = clamp_delta(1.0 / (2.0 * static_cast<double>(n_net) * t * t));
  p.variance_proxy = env.noise_sigma() * env.noise_sigma();

  std::vector<ArmId> active(n_net);
  std::iota(active.begin(), active.end(), ArmId{0});
  std::vector<double> est(n_net, 0.0);
  std::uint64_t remaining = horizon;
  std::size_t completed = 0;

  for (std::size_t i = 1; i < batches && active.size() > 1; ++i) {
    const Eigen::MatrixXd pts = detail::columns(pts_all, active);
    const Eigen::MatrixXd basis = detail::span_basis(pts);
    if (basis.cols() == 0) break;
    const Eigen::MatrixXd z = basis.transpose() * pts;
    const int r = static_cast<int>(z.rows());

    const double qi = std::pow(q, static_cast<double>(i));
    const double eps = d * std::sqrt(std::log(t) / qi);
    const double budget = std::ceil(alg4_batch_budget(qi, d, t, rho));

    const FrankWolfeResult fw = g_optimal_design(z, seeds.shared, i);
    const Design core = effective_support(fw.design);
    const std::size_t m = core.size();
    std::vector<std::uint64_t> counts(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double share = alg.even_allocation ? 1.0 / static_cast<double>(m) : core.weights[static_cast<Eigen::Index>(j)];
      counts[j] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(share * budget * (1.0 - 1e-12))));
    }
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total > remaining) break;

    std::vector<SampleStats> stats(m);
    for (std::size_t j = 0; j < m; ++j) {
      const ArmId id = active[core.indices[j]];
      stats[j] = {counts[j], run.pull(id, pts_all.col(id), counts[j])};
    }
    remaining -= total;

    ReproLseParams call = p;
    call.batch = i;
    call.tau = alg4_batch_tau(eps, *std::min_element(counts.begin(), counts.end()), p, r, m);
    const ReproLseResult lse = reproducible_lse(core, stats, call, seeds.shared);
    const Eigen::VectorXd fitted = z.transpose() * lse.theta;
    const double margin = 2.0 * std::max(eps, call.tau);

    std::vector<double> local_est(fitted.data(), fitted.data() + fitted.size());
    const double top = *std::max_element(local_est.begin(), local_est.end());
    BatchRecord rec;
    rec.index = i;
    rec.active = active.size();
    rec.pulls = total;
    rec.radius = eps;
    rec.radius_tilde = call.tau;
    rec.threshold = margin;
    rec.achieved_g = g_value(core, z);
    rec.core_size = m;
    rec.arms = active;
    rec.estimates = local_est;
    std::vector<ArmId> kept;
    for (std::size_t j = 0; j < active.size(); ++j) {
      est[active[j]] = local_est[j];
      (local_est[j] < top - margin ? rec.eliminated : kept).push_back(active[j]);
    }
    active = std::move(kept);
    if (options.record_batches) run.trace.batches.push_back(std::move(rec));
    ++completed;
  }
  if (completed == 0 && active.size() > 1) throw HorizonTooSmall("no full batch fits in the horizon");
  std::vector<double> active_est;
  for (ArmId a : active) active_est.push_back(est[a]);
  const ArmId best = detail::leader_of(active, active_est);
  run.commit(best, pts_all.col(best), remaining);
  return std::move(run.trace);
}

}  // namespace reprobandit

#endif
