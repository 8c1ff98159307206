#ifndef REPROBANDIT_REPRO_SQ_HPP
#define REPROBANDIT_REPRO_SQ_HPP

// Reproducible mean estimation by randomly offset grid rounding.
//
// The empirical mean is snapped to the nearest point of {u + m*s}, where the
// spacing s equals the accuracy tau and the offset u ~ Uni[0, s) comes from
// the shared randomness. Two executions whose empirical means are gamma apart
// land on different grid points with probability gamma / s, so sizing the
// sample so that |mean - mu| <= s*rho/4 keeps disagreement below rho.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>

#include "reprobandit/errors.hpp"
#include "reprobandit/shared_randomness.hpp"

namespace reprobandit {

// Leading constant of the sample-size rule for [0,1] data.
inline constexpr double kSqSampleConstant = 8.0;
// Every failure probability is clamped from below to keep logs finite.
inline constexpr double kDeltaFloor = 1e-12;
// Subgaussian variance proxy of any [0,1]-valued variable.
inline constexpr double kUnitIntervalProxy = 0.25;

struct SqRequest {
  double tau = 0.1;    // accuracy, also the grid spacing
  double rho = 0.1;    // reproducibility budget of this call
  double delta = 0.01; // failure probability of the accuracy guarantee
  SubstreamKey key{Purpose::grid_offset, 0, 0};
  double variance_proxy = kUnitIntervalProxy;
};

struct SampleStats {
  std::uint64_t count = 0;
  double sum = 0.0;

  void add(double x) noexcept {
    ++count;
    sum += x;
  }
  double mean() const noexcept { return count == 0 ? 0.0 : sum / static_cast<double>(count); }

  static SampleStats of(std::span<const double> xs) noexcept {
    return {xs.size(), std::accumulate(xs.begin(), xs.end(), 0.0)};
  }
};

inline double clamp_delta(double delta) noexcept { return delta < kDeltaFloor ? kDeltaFloor : delta; }

inline void validate(const SqRequest& req) {
  if (!(req.tau > 0.0) || !std::isfinite(req.tau)) throw InvalidArgument("tau must be positive");
  if (!(req.rho > 0.0 && req.rho <= 1.0)) throw InvalidArgument("rho must lie in (0,1]");
  if (!(req.delta > 0.0 && req.delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (req.delta >= req.rho) throw InvalidRegime("delta must be smaller than rho");
  if (!(req.variance_proxy >= 0.0)) throw InvalidArgument("variance proxy must be nonnegative");
}

// n = ceil(C0 * (4*proxy) * ln(1/delta) / (tau^2 rho^2)), at least one sample.
inline std::uint64_t required_samples(const SqRequest& req) {
  validate(req);
  const double scale = 4.0 * req.variance_proxy;
  const double n = kSqSampleConstant * scale * std::log(1.0 / clamp_delta(req.delta)) /
                   (req.tau * req.tau * req.rho * req.rho);
  const double c = std::ceil(n);
  return c < 1.0 ? 1 : static_cast<std::uint64_t>(c);
}

// Deviation of an n-sample mean that is exceeded with probability at most delta
// (two-sided subgaussian tail with the given variance proxy, up to a factor 2).
inline double concentration_radius(std::uint64_t n, double delta, double variance_proxy = kUnitIntervalProxy) {
  if (n == 0) return INFINITY;
  return std::sqrt(2.0 * variance_proxy * std::log(1.0 / clamp_delta(delta)) / static_cast<double>(n));
}

// Finest accuracy that n samples afford under the sample-size rule above.
inline double supported_tau(std::uint64_t n, double rho, double delta, double variance_proxy) {
  if (n == 0) return INFINITY;
  const double scale = 4.0 * variance_proxy;
  return std::sqrt(kSqSampleConstant * scale * std::log(1.0 / clamp_delta(delta)) / static_cast<double>(n)) / rho;
}

// Nearest point of {offset + m * spacing}; exact midpoints round down.
inline double round_to_grid(double value, double spacing, double offset) noexcept {
  const double m = std::ceil((value - offset) / spacing - 0.5);
  return offset + m * spacing;
}

inline double grid_offset(SharedSeed seed, const SubstreamKey& key, double spacing) noexcept {
  return draw_uniform(seed, key, 0.0, spacing);
}

inline double repro_mean(const SampleStats& stats, const SqRequest& req, SharedSeed seed) {
  const std::uint64_t need = required_samples(req);
  if (stats.count < need) {
    throw InsufficientSamples("repro_mean needs " + std::to_string(need) + " samples, got " +
                              std::to_string(stats.count));
  }
  return round_to_grid(stats.mean(), req.tau, grid_offset(seed, req.key, req.tau));
}

inline double repro_mean(std::span<const double> samples, const SqRequest& req, SharedSeed seed) {
  return repro_mean(SampleStats::of(samples), req, seed);
}

// Probability that a uniformly offset grid of spacing s separates two points
// gamma apart (gamma <= s).
inline double grid_crossing_probability(double gamma, double spacing) {
  if (!(spacing > 0.0)) throw InvalidArgument("spacing must be positive");
  if (gamma < 0.0 || gamma > spacing) throw OutOfRange("gamma must lie in [0, spacing]");
  return gamma / spacing;
}

}  // namespace reprobandit

#endif
