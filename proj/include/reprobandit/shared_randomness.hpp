#ifndef REPROBANDIT_SHARED_RANDOMNESS_HPP
#define REPROBANDIT_SHARED_RANDOMNESS_HPP

// Counter-based randomness. Every value is a pure function of
// (seed, substream key, ordinal), so two executions that share a seed see the
// same internal draws no matter how many reward samples each of them consumed.

#include <compare>
#include <cstdint>
#include <limits>
#include <random>

namespace reprobandit {

struct SharedSeed {
  std::uint64_t value = 0;
  friend constexpr bool operator==(SharedSeed, SharedSeed) = default;
};

// Seed of the per-execution reward process. Deliberately a different type
// from SharedSeed so the two cannot be swapped by accident.
struct RewardSeed {
  std::uint64_t value = 0;
  friend constexpr bool operator==(RewardSeed, RewardSeed) = default;
};

enum class Purpose : std::uint8_t { threshold, grid_offset, ky_direction, other };

struct SubstreamKey {
  Purpose purpose = Purpose::other;
  std::uint64_t batch_index = 0;
  std::uint64_t arm_index = 0;
  friend constexpr auto operator<=>(const SubstreamKey&, const SubstreamKey&) = default;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v + kGolden));
}

// 53 random mantissa bits -> [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

constexpr std::uint64_t substream_hash(SharedSeed seed, const SubstreamKey& key) noexcept {
  std::uint64_t h = detail::mix64(seed.value ^ 0x5DEECE66DULL);
  h = detail::combine(h, static_cast<std::uint64_t>(key.purpose) + 1);
  h = detail::combine(h, key.batch_index);
  h = detail::combine(h, key.arm_index);
  return h;
}

// Raw 64-bit value number `ordinal` of the stream rooted at `stream_hash`.
constexpr std::uint64_t counter_bits(std::uint64_t stream_hash, std::uint64_t ordinal) noexcept {
  return detail::mix64(stream_hash + (ordinal + 1) * detail::kGolden);
}

// UniformRandomBitGenerator over a counter stream, so the standard
// distributions can be driven from a replayable source.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  constexpr CounterEngine() = default;
  constexpr explicit CounterEngine(std::uint64_t stream_hash, std::uint64_t start = 0) noexcept
      : stream_(stream_hash), counter_(start) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return counter_bits(stream_, counter_++); }

  constexpr std::uint64_t position() const noexcept { return counter_; }
  constexpr void seek(std::uint64_t ordinal) noexcept { counter_ = ordinal; }

 private:
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

// Uniform value in [lo, hi); lo == hi returns lo.
inline double draw_uniform(SharedSeed seed, const SubstreamKey& key, double lo, double hi,
                           std::uint64_t ordinal = 0) noexcept {
  if (lo == hi) return lo;
  const double u = detail::to_unit(counter_bits(substream_hash(seed, key), ordinal));
  return lo + (hi - lo) * u;
}

// Stateful cursor over one substream: successive calls advance the ordinal.
class Substream {
 public:
  Substream(SharedSeed seed, const SubstreamKey& key) noexcept
      : engine_(substream_hash(seed, key)) {}

  double uniform(double lo, double hi) noexcept {
    const double u = detail::to_unit(engine_());
    return lo == hi ? lo : lo + (hi - lo) * u;
  }

  double normal() {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(engine_);
  }

  std::uint64_t ordinal() const noexcept { return engine_.position(); }
  CounterEngine& engine() noexcept { return engine_; }

 private:
  CounterEngine engine_;
};

}  // namespace reprobandit

#endif
