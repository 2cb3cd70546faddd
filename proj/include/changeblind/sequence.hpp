#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace changeblind::data {

inline constexpr std::size_t kBreakEvery = 5;
/// Target average positions are spread over the middle of the rank range,
/// leaving this fraction of (length - 1) free at each end.
inline constexpr double kRankMargin = 0.25;

struct SequencePlan {
  std::uint64_t seed = 0;
  std::size_t break_every = kBreakEvery;
  std::vector<std::string> pair_ids;                 // sorted, unique
  std::vector<std::vector<std::string>> sequences;   // one slot per observer

  /// 1-based positions after which a break screen is shown.
  std::vector<std::size_t> breaks(std::size_t slot) const;
};

/// Builds one sequence per entry of `lengths`. Pairs are dealt so that the
/// per-pair exposure counts differ by at most one; within each sequence the
/// order follows per-pair target positions with random jitter, and a local
/// swap search then pulls each pair's average normalised position towards
/// its target. Deterministic from seed. ValidationError for lengths of zero
/// or above the pair count, or for duplicate/invalid pair ids.
SequencePlan generate_sequences(std::span<const std::string> pair_ids,
                                std::span<const std::size_t> lengths, std::uint64_t seed);

/// n_observers full-length sequences.
SequencePlan generate_sequences(std::size_t n_observers, std::span<const std::string> pair_ids,
                                std::uint64_t seed);

/// Per-pair presentation counts (pairs never shown have count 0).
std::map<std::string, std::size_t> exposure_counts(const SequencePlan& plan);

/// Per-pair mean 1-based rank over the sequences that show the pair.
std::map<std::string, double> average_ranks(const SequencePlan& plan);

/// [lo, hi] of the targeted average ranks for sequences of this length.
std::pair<double, double> target_rank_range(std::size_t length);

/// Kolmogorov-Smirnov statistic of the sample against uniform on [lo, hi].
double ks_uniform(std::span<const double> values, double lo, double hi);

std::string plan_to_json(const SequencePlan& plan);
SequencePlan plan_from_json(const std::string& text);

}  // namespace changeblind::data
