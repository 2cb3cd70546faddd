#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "changeblind/features.hpp"

namespace changeblind::stats {

inline constexpr double kTimeoutSeconds = 60.0;
/// Clicks within this Chebyshev distance of the change count as hits.
inline constexpr std::size_t kHitRadiusPx = 40;

enum class Outcome { hit, false_positive, timeout };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);

struct Click {
  int x = 0;
  int y = 0;

  friend bool operator==(const Click&, const Click&) = default;
};

struct DetectionRecord {
  std::string observer_id;
  std::string pair_id;
  int sequence_index = 1;
  Outcome outcome = Outcome::hit;
  double time_s = 0.0;
  std::optional<Click> click;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

/// Checks the record invariants; throws ValidationError with the reason.
/// When image dimensions are given, hit clicks must lie inside them.
void validate_record(const DetectionRecord& r, std::optional<std::size_t> width = std::nullopt,
                     std::optional<std::size_t> height = std::nullopt);

/// Hit/false-positive rule shared by the analysis and the experiment server.
/// No click means timeout.
Outcome classify_click(const features::ChangeMask& mask, const std::optional<Click>& click,
                       std::size_t radius = kHitRadiusPx);

// Serialisation: JSON lines and CSV with columns
// observer_id,pair_id,sequence_index,outcome,time_s,click_x,click_y.
std::string record_to_json_line(const DetectionRecord& r);
DetectionRecord record_from_json_line(std::string_view line);
void write_records_jsonl(std::ostream& out, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_records_jsonl(std::istream& in);
void write_records_csv(std::ostream& out, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_records_csv(std::istream& in);
/// Chooses the reader from the extension (.csv, otherwise JSON lines).
std::vector<DetectionRecord> read_records_file(const std::string& path);

struct ObserverProfile {
  std::string observer_id;
  std::optional<double> age;
  std::string site;
  std::size_t n_records = 0;
  double false_positive_rate = 0.0;
  double non_detection_rate = 0.0;
  bool screened_out = false;
};

struct ScreeningResult {
  std::vector<ObserverProfile> profiles;  // sorted by observer_id
  std::set<std::string> kept;
  std::set<std::string> discarded;
  double false_positive_threshold = 0.0;
  double non_detection_threshold = 0.0;
};

/// Discards observers whose false-positive or non-detection rate exceeds
/// mean + 2 * (sample) standard deviation across observers. Single pass.
/// Throws ValidationError with fewer than 3 observers.
ScreeningResult screen_observers(std::span<const DetectionRecord> records);

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); when the IQR is zero the standard
/// deviation is used alone. Throws ValidationError for n < 2 or when all
/// samples are equal.
double silverman_bandwidth(std::span<const double> samples);

/// Linear-interpolation quantile (R type 7) of unsorted data.
double quantile(std::span<const double> samples, double q);

inline constexpr std::size_t kKdeGridPoints = 2048;

struct Peak {
  double location = 0.0;
  double density = 0.0;
};

struct KdeResult {
  double mode = 0.0;
  std::vector<Peak> peaks;  // descending density
  double bandwidth = 0.0;
  bool degenerate = false;
  double grid_step = 0.0;
};

/// Gaussian KDE density at x.
double kde_density(std::span<const double> samples, double bandwidth, double x);

/// Gaussian KDE with Silverman bandwidth on kKdeGridPoints points spanning
/// [min - 3h, max + 3h]. A peak is a grid point above its left neighbour and
/// not below its right one (plateaus resolve to their smallest time).
/// All-equal samples give the common value with degenerate = true.
KdeResult kde_dominant_mode(std::span<const double> samples);

struct CriticalTime {
  std::optional<double> t_crit;  // empty: unimodal, no cluster split
  std::vector<Peak> peaks;
};

/// Density minimum between the two highest peaks of the KDE of per-pair
/// modes. Throws ValidationError with fewer than 2 distinct modes.
CriticalTime find_critical_time(std::span<const double> modes);

enum class Cluster { C1, C2 };
std::string_view to_string(Cluster c);

/// C1 iff mode < t_crit.
Cluster cluster_of(double mode_s, double t_crit);

struct PairStatistics {
  std::string pair_id;
  std::vector<double> times;  // hit times, record order
  double mean_s = 0.0;
  double mode_s = 0.0;
  bool degenerate = false;
  std::optional<Cluster> cluster;
  std::size_t timeouts = 0;
  std::size_t false_positives = 0;
  double mean_sequence_index = 0.0;
  std::size_t presentations = 0;
};

/// Per-pair statistics over records of the given observers (all observers
/// when `observers` is null). Timeouts and false positives are counted but
/// excluded from the time samples; pairs without hits are omitted.
std::vector<PairStatistics> pair_statistics(std::span<const DetectionRecord> records,
                                            const std::set<std::string>* observers = nullptr);

void split_clusters(std::span<PairStatistics> stats, double t_crit);

/// Exact two-sided binomial(n, 1/2) p-value for k successes, capped at 1.
double sign_test_p_value(std::size_t k, std::size_t n);

enum class Direction { faster, slower, neither };
std::string_view to_string(Direction d);

struct SignTestResult {
  std::string observer_id;
  std::size_t n_faster = 0;
  std::size_t n_slower = 0;
  std::size_t n_ties = 0;
  Direction direction = Direction::neither;
  double p_value = 1.0;
  bool skipped = false;
  std::string notice;
};

/// Per-observer sign test of hit times against the per-pair reference mode.
/// Observers with fewer than `min_hits` usable hits, or no non-zero
/// differences, are reported as skipped.
std::vector<SignTestResult> consistency_sign_test(std::span<const DetectionRecord> records,
                                                  const std::map<std::string, double>& reference,
                                                  std::size_t min_hits = 8);

}  // namespace changeblind::stats
