#include "changeblind/observer_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "changeblind/csv.hpp"
#include "changeblind/error.hpp"
#include "json.hpp"

namespace changeblind::stats {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::hit:
      return "hit";
    case Outcome::false_positive:
      return "false_positive";
    case Outcome::timeout:
      return "timeout";
  }
  return "unknown";
}

Outcome parse_outcome(std::string_view s) {
  if (s == "hit") return Outcome::hit;
  if (s == "false_positive") return Outcome::false_positive;
  if (s == "timeout") return Outcome::timeout;
  throw ValidationError("unknown outcome '" + std::string(s) + "'");
}

std::string_view to_string(Cluster c) { return c == Cluster::C1 ? "C1" : "C2"; }

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::faster:
      return "faster";
    case Direction::slower:
      return "slower";
    case Direction::neither:
      return "neither";
  }
  return "neither";
}

void validate_record(const DetectionRecord& r, std::optional<std::size_t> width,
                     std::optional<std::size_t> height) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("record (" + r.observer_id + ", " + r.pair_id + "): " + why);
  };
  if (!csv::valid_identifier(r.observer_id)) fail("invalid observer_id");
  if (!csv::valid_identifier(r.pair_id)) fail("invalid pair_id");
  if (r.sequence_index < 1) fail("sequence_index must be >= 1");
  if (!std::isfinite(r.time_s) || r.time_s <= 0.0 || r.time_s > kTimeoutSeconds) {
    fail("time_s must lie in (0, 60]");
  }
  switch (r.outcome) {
    case Outcome::timeout:
      if (r.time_s != kTimeoutSeconds) fail("timeout records must have time_s = 60");
      if (r.click) fail("timeout records carry no click");
      break;
    case Outcome::hit:
    case Outcome::false_positive:
      if (!r.click) fail("click required for outcome " + std::string(to_string(r.outcome)));
      if (r.outcome == Outcome::hit && width && height) {
        if (r.click->x < 0 || r.click->y < 0 || static_cast<std::size_t>(r.click->x) >= *width ||
            static_cast<std::size_t>(r.click->y) >= *height) {
          fail("hit click outside image bounds");
        }
      }
      break;
  }
}

Outcome classify_click(const features::ChangeMask& mask, const std::optional<Click>& click,
                       std::size_t radius) {
  if (!click) return Outcome::timeout;
  return mask.chebyshev_distance(click->x, click->y) <= radius ? Outcome::hit
                                                              : Outcome::false_positive;
}

// --- serialisation ---------------------------------------------------------

std::string record_to_json_line(const DetectionRecord& r) {
  nlohmann::ordered_json j;
  j["observer_id"] = r.observer_id;
  j["pair_id"] = r.pair_id;
  j["sequence_index"] = r.sequence_index;
  j["outcome"] = std::string(to_string(r.outcome));
  j["time_s"] = r.time_s;
  j["click_x"] = r.click ? nlohmann::ordered_json(r.click->x) : nlohmann::ordered_json(nullptr);
  j["click_y"] = r.click ? nlohmann::ordered_json(r.click->y) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

DetectionRecord record_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed record JSON: ") + e.what());
  }
  try {
    DetectionRecord r;
    r.observer_id = j.at("observer_id").get<std::string>();
    r.pair_id = j.at("pair_id").get<std::string>();
    r.sequence_index = j.at("sequence_index").get<int>();
    r.outcome = parse_outcome(j.at("outcome").get<std::string>());
    r.time_s = j.at("time_s").get<double>();
    const bool has_x = j.contains("click_x") && !j["click_x"].is_null();
    const bool has_y = j.contains("click_y") && !j["click_y"].is_null();
    if (has_x != has_y) throw ValidationError("click_x and click_y must both be present or null");
    if (has_x) r.click = Click{j["click_x"].get<int>(), j["click_y"].get<int>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("record schema mismatch: ") + e.what());
  }
}

void write_records_jsonl(std::ostream& out, std::span<const DetectionRecord> records) {
  for (const DetectionRecord& r : records) out << record_to_json_line(r) << '\n';
}

std::vector<DetectionRecord> read_records_jsonl(std::istream& in) {
  std::vector<DetectionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json_line(line));
  }
  return out;
}

namespace {
constexpr const char* kRecordHeader =
    "observer_id,pair_id,sequence_index,outcome,time_s,click_x,click_y";
}

void write_records_csv(std::ostream& out, std::span<const DetectionRecord> records) {
  out << kRecordHeader << '\n';
  for (const DetectionRecord& r : records) {
    out << r.observer_id << ',' << r.pair_id << ',' << r.sequence_index << ','
        << to_string(r.outcome) << ',' << csv::format_double(r.time_s) << ',';
    if (r.click) {
      out << r.click->x << ',' << r.click->y;
    } else {
      out << ',';
    }
    out << '\n';
  }
}

std::vector<DetectionRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("record CSV is empty (no header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordHeader) {
    throw ValidationError(std::string("record CSV header must be: ") + kRecordHeader);
  }
  std::vector<DetectionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = csv::split_line(line);
    if (f.size() != 7) throw ValidationError("record CSV row must have 7 fields: " + line);
    DetectionRecord r;
    r.observer_id = f[0];
    r.pair_id = f[1];
    r.sequence_index = static_cast<int>(csv::parse_long(f[2], "sequence_index"));
    r.outcome = parse_outcome(f[3]);
    r.time_s = csv::parse_double(f[4], "time_s");
    if (f[5].empty() != f[6].empty()) {
      throw ValidationError("click_x and click_y must both be present or empty");
    }
    if (!f[5].empty()) {
      r.click = Click{static_cast<int>(csv::parse_long(f[5], "click_x")),
                      static_cast<int>(csv::parse_long(f[6], "click_y"))};
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DetectionRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open records file " + path);
  const bool is_csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return is_csv ? read_records_csv(in) : read_records_jsonl(in);
}

// --- screening -------------------------------------------------------------

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ScreeningResult screen_observers(std::span<const DetectionRecord> records) {
  std::map<std::string, ObserverProfile> by_id;
  std::map<std::string, std::size_t> fp, nd;
  for (const DetectionRecord& r : records) {
    ObserverProfile& p = by_id[r.observer_id];
    p.observer_id = r.observer_id;
    ++p.n_records;
    if (r.outcome == Outcome::false_positive) ++fp[r.observer_id];
    if (r.outcome == Outcome::timeout) ++nd[r.observer_id];
  }
  if (by_id.size() < 3) {
    throw ValidationError("screening needs at least 3 observers, got " +
                          std::to_string(by_id.size()));
  }
  std::vector<double> fp_rates, nd_rates;
  for (auto& [id, p] : by_id) {
    p.false_positive_rate = static_cast<double>(fp[id]) / static_cast<double>(p.n_records);
    p.non_detection_rate = static_cast<double>(nd[id]) / static_cast<double>(p.n_records);
    fp_rates.push_back(p.false_positive_rate);
    nd_rates.push_back(p.non_detection_rate);
  }
  ScreeningResult out;
  out.false_positive_threshold = mean_of(fp_rates) + 2.0 * sample_sd(fp_rates);
  out.non_detection_threshold = mean_of(nd_rates) + 2.0 * sample_sd(nd_rates);
  // Absorbs rounding in the mean when every rate is identical.
  constexpr double kSlack = 1e-12;
  for (auto& [id, p] : by_id) {
    p.screened_out = p.false_positive_rate > out.false_positive_threshold + kSlack ||
                     p.non_detection_rate > out.non_detection_threshold + kSlack;
    (p.screened_out ? out.discarded : out.kept).insert(id);
    out.profiles.push_back(p);
  }
  return out;
}

// --- kernel density ----------------------------------------------------------

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw ValidationError("quantile of an empty sample");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw ValidationError("bandwidth needs at least 2 samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw ValidationError("degenerate sample: all values equal");
  const double sd = sample_sd(samples);
  const double iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

double kde_density(std::span<const double> samples, double bandwidth, double x) {
  double s = 0.0;
  for (double xi : samples) {
    const double u = (x - xi) / bandwidth;
    s += std::exp(-0.5 * u * u);
  }
  return s / (static_cast<double>(samples.size()) * bandwidth *
              std::sqrt(2.0 * std::numbers::pi));
}

namespace {

struct DensityGrid {
  double lo = 0.0;
  double step = 0.0;
  std::vector<double> density;
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

DensityGrid evaluate_grid(std::span<const double> samples, double h) {
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  DensityGrid g;
  g.lo = *mn - 3.0 * h;
  const double hi = *mx + 3.0 * h;
  g.step = (hi - g.lo) / static_cast<double>(kKdeGridPoints - 1);
  g.density.resize(kKdeGridPoints);
  for (std::size_t i = 0; i < kKdeGridPoints; ++i) g.density[i] = kde_density(samples, h, g.at(i));
  return g;
}

std::vector<std::size_t> peak_indices(const std::vector<double>& d) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    if (d[i] > d[i - 1] && d[i] >= d[i + 1]) idx.push_back(i);
  }
  // Highest first; equal densities keep the smaller time first.
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  return idx;
}

}  // namespace

KdeResult kde_dominant_mode(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("mode of an empty sample");
  KdeResult out;
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn == *mx) {
    out.mode = *mn;
    out.degenerate = true;
    out.peaks.push_back({*mn, std::numeric_limits<double>::infinity()});
    return out;
  }
  out.bandwidth = silverman_bandwidth(samples);
  const DensityGrid g = evaluate_grid(samples, out.bandwidth);
  out.grid_step = g.step;
  const std::vector<std::size_t> idx = peak_indices(g.density);
  for (std::size_t i : idx) out.peaks.push_back({g.at(i), g.density[i]});
  if (out.peaks.empty()) {
    const auto it = std::max_element(g.density.begin(), g.density.end());
    const auto i = static_cast<std::size_t>(it - g.density.begin());
    out.peaks.push_back({g.at(i), *it});
  }
  out.mode = out.peaks.front().location;
  return out;
}

CriticalTime find_critical_time(std::span<const double> modes) {
  std::set<double> distinct(modes.begin(), modes.end());
  if (distinct.size() < 2) throw ValidationError("critical time needs at least 2 distinct modes");
  const double h = silverman_bandwidth(modes);
  const DensityGrid g = evaluate_grid(modes, h);
  const std::vector<std::size_t> idx = peak_indices(g.density);
  CriticalTime out;
  for (std::size_t i : idx) out.peaks.push_back({g.at(i), g.density[i]});
  if (idx.size() < 2) return out;
  const std::size_t a = std::min(idx[0], idx[1]);
  const std::size_t b = std::max(idx[0], idx[1]);
  std::size_t best = a;
  for (std::size_t i = a; i <= b; ++i) {
    if (g.density[i] < g.density[best]) best = i;
  }
  out.t_crit = g.at(best);
  return out;
}

Cluster cluster_of(double mode_s, double t_crit) {
  return mode_s < t_crit ? Cluster::C1 : Cluster::C2;
}

std::vector<PairStatistics> pair_statistics(std::span<const DetectionRecord> records,
                                            const std::set<std::string>* observers) {
  std::map<std::string, PairStatistics> by_pair;
  std::map<std::string, double> index_sum;
  for (const DetectionRecord& r : records) {
    if (observers && !observers->contains(r.observer_id)) continue;
    PairStatistics& s = by_pair[r.pair_id];
    s.pair_id = r.pair_id;
    ++s.presentations;
    index_sum[r.pair_id] += r.sequence_index;
    switch (r.outcome) {
      case Outcome::hit:
        s.times.push_back(r.time_s);
        break;
      case Outcome::timeout:
        ++s.timeouts;
        break;
      case Outcome::false_positive:
        ++s.false_positives;
        break;
    }
  }
  std::vector<PairStatistics> out;
  for (auto& [id, s] : by_pair) {
    if (s.times.empty()) continue;
    s.mean_sequence_index = index_sum[id] / static_cast<double>(s.presentations);
    s.mean_s = mean_of(s.times);
    const KdeResult k = kde_dominant_mode(s.times);
    s.mode_s = k.mode;
    s.degenerate = k.degenerate;
    out.push_back(std::move(s));
  }
  return out;
}

void split_clusters(std::span<PairStatistics> stats, double t_crit) {
  if (!std::isfinite(t_crit)) throw InputDomainError("t_crit must be finite");
  for (PairStatistics& s : stats) s.cluster = cluster_of(s.mode_s, t_crit);
}

double sign_test_p_value(std::size_t k, std::size_t n) {
  if (n == 0) return 1.0;
  const std::size_t tail = std::min(k, n - k);
  // P(X <= tail) via log-space binomial terms.
  double p = 0.0;
  for (std::size_t i = 0; i <= tail; ++i) {
    const double log_term = std::lgamma(static_cast<double>(n) + 1.0) -
                            std::lgamma(static_cast<double>(i) + 1.0) -
                            std::lgamma(static_cast<double>(n - i) + 1.0) -
                            static_cast<double>(n) * std::numbers::ln2;
    p += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * p);
}

std::vector<SignTestResult> consistency_sign_test(std::span<const DetectionRecord> records,
                                                  const std::map<std::string, double>& reference,
                                                  std::size_t min_hits) {
  std::map<std::string, SignTestResult> by_obs;
  std::map<std::string, std::size_t> usable;
  for (const DetectionRecord& r : records) {
    SignTestResult& s = by_obs[r.observer_id];
    s.observer_id = r.observer_id;
    if (r.outcome != Outcome::hit) continue;
    const auto it = reference.find(r.pair_id);
    if (it == reference.end()) continue;
    ++usable[r.observer_id];
    const double diff = r.time_s - it->second;
    if (diff < 0.0) {
      ++s.n_faster;
    } else if (diff > 0.0) {
      ++s.n_slower;
    } else {
      ++s.n_ties;
    }
  }
  std::vector<SignTestResult> out;
  for (auto& [id, s] : by_obs) {
    const std::size_t n = s.n_faster + s.n_slower;
    if (usable[id] < min_hits) {
      s.skipped = true;
      s.notice = "fewer than " + std::to_string(min_hits) + " hit records";
    } else if (n == 0) {
      s.skipped = true;
      s.notice = "no non-zero differences from the reference mode";
    } else {
      s.p_value = sign_test_p_value(s.n_faster, n);
      s.direction = s.n_faster > s.n_slower   ? Direction::faster
                    : s.n_slower > s.n_faster ? Direction::slower
                                              : Direction::neither;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace changeblind::stats
