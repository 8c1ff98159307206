#ifndef REPROBANDIT_OPTIMAL_DESIGN_HPP
#define REPROBANDIT_OPTIMAL_DESIGN_HPP

// G-optimal experimental designs over a finite list of arms (columns of a
// d x K matrix): randomized sparse initialization, Frank-Wolfe refinement,
// weight rebalancing and rounding into pull counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reprobandit/errors.hpp"
#include "reprobandit/shared_randomness.hpp"

namespace reprobandit {

// Leading constant of the sample count N = ceil(C1 d ln(1/delta) / eps^2).
inline constexpr double kMultisetConstant = 4.0;
// Core-set size constant: the worst excess over 2d seen on 1050 random unit-vector
// sets per d in 2..8 (K up to 1000) needed 0.27; frozen with headroom.
inline constexpr double kCoreSetConstant = 0.5;
inline constexpr std::size_t kRefactorEvery = 50;

struct Design {
  Eigen::MatrixXd support;            // d x m, one column per core arm
  Eigen::VectorXd weights;            // m, sums to one
  std::vector<std::size_t> indices;   // column of each core arm in the source arm list

  int dim() const noexcept { return static_cast<int>(support.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(support.cols()); }

  Eigen::MatrixXd info_matrix() const {
    return support * weights.asDiagonal() * support.transpose();
  }
};

// Design on given columns with the given weights; indices default to 0..m-1.
inline Design make_design(Eigen::MatrixXd support, Eigen::VectorXd weights,
                          std::vector<std::size_t> indices = {}) {
  if (support.cols() != weights.size()) throw InvalidArgument("support and weights differ in size");
  if (indices.empty()) {
    indices.resize(static_cast<std::size_t>(support.cols()));
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }
  return Design{std::move(support), std::move(weights), std::move(indices)};
}

namespace detail {

inline bool spans(const Eigen::MatrixXd& arms) {
  if (arms.cols() < arms.rows()) return false;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(arms);
  lu.setThreshold(1e-10);
  return lu.rank() == arms.rows();
}

// Cholesky of V with a relative eigenvalue floor; throws on (near) singularity.
inline Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.size() == 0 || !(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-13 * ev.maxCoeff()) {
    throw SingularDesign("information matrix is singular");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) throw SingularDesign("information matrix is not positive definite");
  return llt;
}

// a^T M a for every column a of `arms`.
inline Eigen::VectorXd quad_forms(const Eigen::MatrixXd& m, const Eigen::MatrixXd& arms) {
  return (m * arms).cwiseProduct(arms).colwise().sum().transpose();
}

inline Eigen::Index argmax_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace detail

// max over the arm list of a^T V(pi)^{-1} a.
inline double g_value(const Design& design, const Eigen::MatrixXd& arms) {
  if (arms.rows() != design.dim()) throw InvalidArgument("arm dimension differs from design dimension");
  const auto llt = detail::factor_spd(design.info_matrix());
  const Eigen::MatrixXd solved = llt.solve(arms);
  return solved.cwiseProduct(arms).colwise().sum().maxCoeff();
}

inline double g_value(const Design& design) { return g_value(design, design.support); }

// d rounds of: draw a Gaussian direction orthogonal to the span picked so far,
// add the arms of largest and smallest correlation with it. Directions come
// from substream (ky_direction, iteration, 0), or (ky_direction, batch,
// iteration) when a batch index is given.
inline Design ky_initialize(const Eigen::MatrixXd& arms, SharedSeed seed,
                            std::optional<std::uint64_t> batch = std::nullopt) {
  const Eigen::Index d = arms.rows();
  const Eigen::Index k = arms.cols();
  if (d < 1 || k < 1) throw InvalidArgument("empty arm set");
  if (!detail::spans(arms)) throw DegenerateArmSet("arms do not span the space");

  Eigen::MatrixXd basis(d, 0);
  std::vector<std::size_t> picked;
  for (Eigen::Index it = 0; it < d; ++it) {
    const auto iter = static_cast<std::uint64_t>(it);
    const SubstreamKey key = batch ? SubstreamKey{Purpose::ky_direction, *batch, iter}
                                   : SubstreamKey{Purpose::ky_direction, iter, 0};
    Substream stream(seed, key);
    Eigen::VectorXd v(d);
    for (int attempt = 0;; ++attempt) {
      for (Eigen::Index j = 0; j < d; ++j) v[j] = stream.normal();
      v -= basis * (basis.transpose() * v);
      if (v.norm() > 1e-8) break;
      if (attempt > 64) throw DegenerateArmSet("could not draw a direction in the complement");
    }
    const Eigen::VectorXd proj = arms.transpose() * v;
    Eigen::Index hi = 0, lo = 0;
    for (Eigen::Index j = 1; j < k; ++j) {
      if (proj[j] > proj[hi]) hi = j;
      if (proj[j] < proj[lo]) lo = j;
    }
    Eigen::VectorXd r = arms.col(hi) - arms.col(lo);
    r -= basis * (basis.transpose() * r);
    if (r.norm() <= 1e-10) {
      const Eigen::Index far = detail::argmax_lowest(proj.cwiseAbs());
      if (std::abs(proj[far]) <= 1e-12) throw DegenerateArmSet("arms are orthogonal to a free direction");
      r = arms.col(far);
      r -= basis * (basis.transpose() * r);
    }
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = r.normalized();
    picked.push_back(static_cast<std::size_t>(hi));
    picked.push_back(static_cast<std::size_t>(lo));
  }

  // Merge repeated picks, keeping first-pick order.
  std::vector<std::size_t> order;
  for (std::size_t p : picked) {
    if (std::find(order.begin(), order.end(), p) == order.end()) order.push_back(p);
  }
  Eigen::MatrixXd support(d, static_cast<Eigen::Index>(order.size()));
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(order.size()));
  const double unit = 1.0 / static_cast<double>(picked.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    support.col(static_cast<Eigen::Index>(j)) = arms.col(static_cast<Eigen::Index>(order[j]));
    weights[static_cast<Eigen::Index>(j)] =
        unit * static_cast<double>(std::count(picked.begin(), picked.end(), order[j]));
  }
  Design out = make_design(std::move(support), std::move(weights), std::move(order));
  if (!detail::spans(out.support)) throw DegenerateArmSet("initial support does not span");
  return out;
}

struct FrankWolfeResult {
  Design design;
  double g = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> log_det;  // log det V after each iteration, starting with the initial design
};

// Frank-Wolfe on the D-optimal objective with the closed-form step
// gamma = (g/d - 1)/(g - 1), stopping once g <= target_g (2d when not positive).
inline FrankWolfeResult frank_wolfe_design(const Eigen::MatrixXd& arms, const Design& init, double target_g = 0.0,
                                           std::size_t max_iters = 10000) {
  const Eigen::Index d = arms.rows();
  const Eigen::Index k = arms.cols();
  const double dd = static_cast<double>(d);
  if (init.dim() != d) throw InvalidArgument("initial design dimension differs from arms");
  if (target_g <= 0.0) target_g = 2.0 * dd;
  if (target_g < dd) throw InvalidArgument("target g must be at least d");

  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  for (std::size_t j = 0; j < init.size(); ++j) {
    const std::size_t idx = init.indices[j];
    if (idx >= static_cast<std::size_t>(k)) throw InvalidArgument("initial design refers to a missing arm");
    w[static_cast<Eigen::Index>(idx)] += init.weights[static_cast<Eigen::Index>(j)];
  }
  w /= w.sum();

  auto full_info = [&] { return Eigen::MatrixXd(arms * w.asDiagonal() * arms.transpose()); };
  Eigen::MatrixXd v = full_info();
  Eigen::MatrixXd vinv = detail::factor_spd(v).solve(Eigen::MatrixXd::Identity(d, d));

  FrankWolfeResult res;
  res.log_det.push_back(std::log(v.determinant()));
  for (;;) {
    const Eigen::VectorXd g = detail::quad_forms(vinv, arms);
    const Eigen::Index star = detail::argmax_lowest(g);
    res.g = g[star];
    if (res.g <= target_g) {
      res.converged = true;
      break;
    }
    if (res.iterations >= max_iters) break;

    const double gs = res.g;
    const double gamma = (gs / dd - 1.0) / (gs - 1.0);
    w *= (1.0 - gamma);
    w[star] += gamma;
    ++res.iterations;
    if (res.iterations % kRefactorEvery == 0) {
      v = full_info();
      vinv = detail::factor_spd(v).solve(Eigen::MatrixXd::Identity(d, d));
    } else {
      const Eigen::VectorXd a = arms.col(star);
      const Eigen::VectorXd u = vinv * a;
      v = (1.0 - gamma) * v + gamma * a * a.transpose();
      vinv = (vinv - (gamma / ((1.0 - gamma) + gamma * gs)) * u * u.transpose()) / (1.0 - gamma);
      if (!vinv.allFinite()) throw SingularDesign("Frank-Wolfe iterate became singular");
    }
    res.log_det.push_back(std::log(v.determinant()));
  }

  std::vector<std::size_t> idx;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (w[j] > 0.0) idx.push_back(static_cast<std::size_t>(j));
  }
  Eigen::MatrixXd support(d, static_cast<Eigen::Index>(idx.size()));
  Eigen::VectorXd weights(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    support.col(static_cast<Eigen::Index>(j)) = arms.col(static_cast<Eigen::Index>(idx[j]));
    weights[static_cast<Eigen::Index>(j)] = w[static_cast<Eigen::Index>(idx[j])];
  }
  weights /= weights.sum();
  res.design = make_design(std::move(support), std::move(weights), std::move(idx));
  return res;
}

// KY initialization followed by Frank-Wolfe.
inline FrankWolfeResult g_optimal_design(const Eigen::MatrixXd& arms, SharedSeed seed,
                                         std::optional<std::uint64_t> batch = std::nullopt, double target_g = 0.0,
                                         std::size_t max_iters = 10000) {
  return frank_wolfe_design(arms, ky_initialize(arms, seed, batch), target_g, max_iters);
}

inline double core_set_bound(int d) {
  const double dd = static_cast<double>(d);
  return kCoreSetConstant * dd * std::log(std::log(dd) + M_E) + 2.0 * dd;
}

// Mixing weight x = 1/(4 d ln max(d,2)).
inline double effective_support_step(int d) {
  const double dd = static_cast<double>(d);
  return 1.0 / (4.0 * dd * std::log(std::max(dd, 2.0)));
}

// Guaranteed minimum weight after rebalancing, as long as fewer than
// ln 2 / x arms start below the step.
inline double effective_support_floor(int d) { return effective_support_step(d) / 2.0; }

// Raises every core weight below x by mixing pi <- (1-x) pi + x delta_a, one
// under-weighted arm at a time. If the cumulative shrink factor would drop
// below 1/2 the step is reduced so that it does not, which keeps g within a
// factor 2 of the input.
inline Design effective_support(const Design& design) {
  const double x0 = effective_support_step(design.dim());
  std::vector<Eigen::Index> low;
  for (Eigen::Index j = 0; j < design.weights.size(); ++j) {
    if (design.weights[j] < x0) low.push_back(j);
  }
  if (low.empty()) return design;
  const double k = static_cast<double>(low.size());
  double x = x0;
  if (std::pow(1.0 - x, k) < 0.5) x = 1.0 - std::pow(2.0, -1.0 / k);

  Design out = design;
  for (Eigen::Index j : low) {
    out.weights *= (1.0 - x);
    out.weights[j] += x;
  }
  out.weights /= out.weights.sum();
  return out;
}

inline std::uint64_t multiset_size(int d, double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  return static_cast<std::uint64_t>(
      std::ceil(kMultisetConstant * static_cast<double>(d) * std::log(1.0 / delta) / (epsilon * epsilon)));
}

// n_a = ceil(pi(a) N) for each core arm, in support order.
inline std::vector<std::uint64_t> design_to_multiset(const Design& design, std::uint64_t total) {
  std::vector<std::uint64_t> n(design.size());
  const double t = static_cast<double>(total);
  for (std::size_t j = 0; j < n.size(); ++j) {
    const double w = design.weights[static_cast<Eigen::Index>(j)];
    if (!(w > 0.0)) throw InvalidArgument("design weights must be positive");
    // Guard against pi(a) N landing a hair above an integer from rounding.
    n[j] = static_cast<std::uint64_t>(std::ceil(w * t * (1.0 - 1e-12)));
  }
  return n;
}

inline std::vector<std::uint64_t> design_to_multiset(const Design& design, double epsilon, double delta) {
  return design_to_multiset(design, multiset_size(design.dim(), epsilon, delta));
}

}  // namespace reprobandit

#endif
