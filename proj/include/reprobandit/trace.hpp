#ifndef REPROBANDIT_TRACE_HPP
#define REPROBANDIT_TRACE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "reprobandit/errors.hpp"

namespace reprobandit {

using ArmId = std::uint32_t;

struct TraceSegment {
  ArmId arm = 0;
  std::uint64_t count = 0;
  friend bool operator==(const TraceSegment&, const TraceSegment&) = default;
};

// Per-batch diagnostics. Fields that do not apply to a policy stay at their
// defaults (NaN for reals, empty for lists).
struct BatchRecord {
  std::size_t index = 0;
  std::size_t active = 0;     // active arms when the batch started
  std::uint64_t pulls = 0;    // pulls spent in the batch
  double radius = std::numeric_limits<double>::quiet_NaN();        // U_i, tau_i or eps_i
  double radius_tilde = std::numeric_limits<double>::quiet_NaN();  // U~_i or eps~_i
  double threshold = std::numeric_limits<double>::quiet_NaN();     // drawn U-bar_i or eps-bar_i
  double achieved_g = std::numeric_limits<double>::quiet_NaN();
  std::size_t core_size = 0;
  std::vector<ArmId> arms;          // arms whose estimates are listed below
  std::vector<double> estimates;
  std::vector<ArmId> eliminated;
};

// The arm sequence of one execution, stored run-length encoded: batched
// policies pull each arm in long contiguous blocks, so a horizon of 10^7
// collapses to a few hundred segments. Adjacent segments never share an arm,
// which makes segment equality the same as sequence equality.
class ExecutionTrace {
 public:
  void append(ArmId arm, std::uint64_t count) {
    if (count == 0) return;
    if (!segments_.empty() && segments_.back().arm == arm) {
      segments_.back().count += count;
    } else {
      segments_.push_back({arm, count});
    }
    length_ += count;
  }

  std::uint64_t length() const noexcept { return length_; }
  const std::vector<TraceSegment>& segments() const noexcept { return segments_; }

  ArmId arm_at(std::uint64_t t) const {
    std::uint64_t seen = 0;
    for (const auto& s : segments_) {
      if (t < seen + s.count) return s.arm;
      seen += s.count;
    }
    throw OutOfRange("trace index past the horizon");
  }

  std::vector<ArmId> expand() const {
    std::vector<ArmId> out;
    out.reserve(length_);
    for (const auto& s : segments_) out.insert(out.end(), s.count, s.arm);
    return out;
  }

  // Pull counts per arm id.
  std::vector<std::uint64_t> pull_counts(std::size_t arms) const {
    std::vector<std::uint64_t> n(arms, 0);
    for (const auto& s : segments_) {
      if (s.arm >= arms) throw InvalidArm("trace refers to an arm outside the environment");
      n[s.arm] += s.count;
    }
    return n;
  }

  bool same_arms(const ExecutionTrace& other) const noexcept { return segments_ == other.segments_; }

  // Rewards are kept only when a run asks for them.
  std::vector<double> rewards;
  std::vector<BatchRecord> batches;
  ArmId committed_arm = 0;  // arm played with the leftover budget

 private:
  std::vector<TraceSegment> segments_;
  std::uint64_t length_ = 0;
};

inline std::optional<std::uint64_t> first_divergence(const ExecutionTrace& a, const ExecutionTrace& b) {
  const auto& sa = a.segments();
  const auto& sb = b.segments();
  std::size_t i = 0, j = 0;
  std::uint64_t left_a = sa.empty() ? 0 : sa[0].count;
  std::uint64_t left_b = sb.empty() ? 0 : sb[0].count;
  std::uint64_t t = 0;
  while (i < sa.size() && j < sb.size()) {
    if (sa[i].arm != sb[j].arm) return t;
    const std::uint64_t step = std::min(left_a, left_b);
    t += step;
    left_a -= step;
    left_b -= step;
    if (left_a == 0 && ++i < sa.size()) left_a = sa[i].count;
    if (left_b == 0 && ++j < sb.size()) left_b = sb[j].count;
  }
  if (i < sa.size() || j < sb.size()) return t;  // one is a strict prefix of the other
  return std::nullopt;
}

struct RunOptions {
  bool record_rewards = false;
  bool record_batches = true;
};

}  // namespace reprobandit

#endif
