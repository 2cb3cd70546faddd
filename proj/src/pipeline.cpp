#include "changeblind/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>

#include "changeblind/colour.hpp"
#include "changeblind/correlation.hpp"
#include "changeblind/csv.hpp"
#include "changeblind/error.hpp"
#include "json.hpp"

namespace changeblind::pipeline {

using nlohmann::ordered_json;

std::set<std::string> retained_observers(std::span<const stats::DetectionRecord> records) {
  std::set<std::string> all;
  for (const auto& r : records) all.insert(r.observer_id);
  if (all.size() < 3) return all;
  return stats::screen_observers(records).kept;
}

std::map<std::string, double> user_experience_by_pair(std::span<const stats::DetectionRecord> records,
                                                      const std::set<std::string>& observers) {
  std::map<std::string, std::vector<int>> idx;
  for (const auto& r : records) {
    if (observers.contains(r.observer_id)) idx[r.pair_id].push_back(r.sequence_index);
  }
  std::map<std::string, double> out;
  for (const auto& [id, v] : idx) out[id] = features::user_experience(v);
  return out;
}

ExtractResult extract_features(const data::BenchmarkDataset& ds, const ExtractOptions& options) {
  ExtractResult result;
  result.errors = ds.errors;
  const auto ue = user_experience_by_pair(ds.records, retained_observers(ds.records));
  for (const auto& pair : ds.pairs) {
    try {
      features::FeatureVector fv;
      fv.pair_id = pair.pair_id;
      const ImageLab a = colour::rgb_to_lab2000hl(pair.original);
      const ImageLab b = colour::rgb_to_lab2000hl(pair.changed);
      fv.f_cm = features::change_magnitude(a, b, pair.mask);
      fv.f_si = features::salience_imbalance(a, b);
      if (const auto it = ue.find(pair.pair_id); it != ue.end()) fv.f_ue = it->second;
      if (options.baselines) {
        const auto region = features::PixelRegion::dilate(pair.mask, options.clutter.local_radius);
        fv.se_global = features::subband_entropy(pair.original, nullptr, options.clutter);
        fv.se_local = features::subband_entropy(pair.original, &region, options.clutter);
        fv.ed_global = features::edge_density(pair.original, nullptr, options.clutter);
        fv.ed_local = features::edge_density(pair.original, &region, options.clutter);
      }
      result.rows.push_back(std::move(fv));
    } catch (const Error& e) {
      result.errors.push_back({pair.pair_id, e.what()});
    }
  }
  std::sort(result.rows.begin(), result.rows.end(),
            [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  return result;
}

std::string_view to_string(Target t) { return t == Target::mode ? "mode" : "indiv"; }

Target parse_target(std::string_view s) {
  if (s == "mode") return Target::mode;
  if (s == "indiv") return Target::indiv;
  throw ValidationError("target must be 'mode' or 'indiv'");
}

namespace {

std::map<std::string, const features::FeatureVector*> index_rows(
    std::span<const features::FeatureVector> rows) {
  std::map<std::string, const features::FeatureVector*> out;
  for (const auto& r : rows) {
    if (!out.emplace(r.pair_id, &r).second) {
      throw ValidationError("feature table repeats pair " + r.pair_id);
    }
  }
  return out;
}

std::vector<stats::DetectionRecord> retained_records(std::span<const stats::DetectionRecord> records) {
  const auto kept = retained_observers(records);
  std::vector<stats::DetectionRecord> out;
  for (const auto& r : records) {
    if (kept.contains(r.observer_id)) out.push_back(r);
  }
  return out;
}

}  // namespace

RegressionData regression_data(std::span<const features::FeatureVector> rows,
                               std::span<const stats::DetectionRecord> records, Target target) {
  const auto by_id = index_rows(rows);
  const auto kept = retained_records(records);
  RegressionData d;
  if (target == Target::mode) {
    for (const auto& s : stats::pair_statistics(kept)) {
      const auto it = by_id.find(s.pair_id);
      if (it == by_id.end()) continue;
      d.ids.push_back(s.pair_id);
      d.x.push_back(model::model_features(*it->second));
      d.y.push_back(s.mode_s);
    }
  } else {
    for (const auto& r : kept) {
      if (r.outcome != stats::Outcome::hit) continue;
      const auto it = by_id.find(r.pair_id);
      if (it == by_id.end()) continue;
      const double idx = static_cast<double>(r.sequence_index);
      d.ids.push_back(r.observer_id + ":" + r.pair_id);
      d.x.push_back({it->second->f_cm, it->second->f_si, idx * idx});
      d.y.push_back(r.time_s);
    }
  }
  return d;
}

RegressionData regression_data(std::span<const features::FeatureVector> rows,
                               const std::map<std::string, double>& targets) {
  RegressionData d;
  for (const auto& [id, row] : index_rows(rows)) {
    const auto it = targets.find(id);
    if (it == targets.end()) continue;
    d.ids.push_back(id);
    d.x.push_back(model::model_features(*row));
    d.y.push_back(it->second);
  }
  return d;
}

std::map<std::string, double> read_targets_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("target CSV is empty (no header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pair_id,target") throw ValidationError("target CSV header must be: pair_id,target");
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 2) throw ValidationError("target CSV rows need 2 fields");
    if (!out.emplace(f[0], csv::parse_double(f[1], "target")).second) {
      throw ValidationError("target CSV repeats pair " + f[0]);
    }
  }
  return out;
}

ClassificationData classification_data(std::span<const features::FeatureVector> rows,
                                       std::span<const stats::DetectionRecord> records,
                                       std::optional<double> t_crit) {
  const auto by_id = index_rows(rows);
  auto pstats = stats::pair_statistics(retained_records(records));
  std::erase_if(pstats, [&](const auto& s) { return !by_id.contains(s.pair_id); });
  ClassificationData d;
  if (t_crit) {
    d.t_crit = *t_crit;
    d.t_crit_from_data = false;
  } else {
    std::vector<double> modes;
    for (const auto& s : pstats) modes.push_back(s.mode_s);
    const auto ct = stats::find_critical_time(modes);
    if (!ct.t_crit) throw ValidationError("per-pair modes are unimodal; pass --t-crit to split them");
    d.t_crit = *ct.t_crit;
  }
  stats::split_clusters(pstats, d.t_crit);
  d.x.resize(static_cast<Eigen::Index>(pstats.size()), 3);
  for (std::size_t i = 0; i < pstats.size(); ++i) {
    const auto f = model::model_features(*by_id.at(pstats[i].pair_id));
    d.x.row(static_cast<Eigen::Index>(i)) << f.f_cm, f.f_si, f.f_ue;
    d.ids.push_back(pstats[i].pair_id);
    d.labels.push_back(*pstats[i].cluster);
  }
  return d;
}

std::vector<model::FeatureCorrelation> feature_correlations(
    std::span<const features::FeatureVector> rows, const std::map<std::string, double>& targets) {
  using Getter = std::optional<double> (*)(const features::FeatureVector&);
  const std::pair<const char*, Getter> columns[] = {
      {"f_cm", [](const features::FeatureVector& f) -> std::optional<double> { return f.f_cm; }},
      {"f_si", [](const features::FeatureVector& f) -> std::optional<double> { return f.f_si; }},
      {"f_ue", [](const features::FeatureVector& f) { return f.f_ue; }},
      {"se_global", [](const features::FeatureVector& f) { return f.se_global; }},
      {"se_local", [](const features::FeatureVector& f) { return f.se_local; }},
      {"ed_global", [](const features::FeatureVector& f) { return f.ed_global; }},
      {"ed_local", [](const features::FeatureVector& f) { return f.ed_local; }},
  };
  std::vector<model::FeatureCorrelation> out;
  for (const auto& [name, get] : columns) {
    std::vector<double> a, b;
    for (const auto& r : rows) {
      const auto v = get(r);
      const auto t = targets.find(r.pair_id);
      if (!v || t == targets.end()) continue;
      a.push_back(*v);
      b.push_back(t->second);
    }
    try {
      out.push_back({name, stats::plcc(a, b), stats::srocc(a, b), a.size()});
    } catch (const ValidationError&) {
      // too few samples or constant column
    }
  }
  return out;
}

std::string analyze_observers(std::span<const stats::DetectionRecord> records,
                              const AnalyzeOptions& options) {
  if (records.empty()) throw ValidationError("no detection records to analyse");
  ordered_json j;
  ordered_json notices = ordered_json::array();
  std::set<std::string> observers, pairs;
  for (const auto& r : records) {
    observers.insert(r.observer_id);
    pairs.insert(r.pair_id);
  }
  j["kind"] = "observer_analysis";
  j["n_records"] = records.size();
  j["n_observers"] = observers.size();
  j["n_pairs"] = pairs.size();

  ordered_json screening;
  std::set<std::string> kept = observers;
  if (observers.size() < 3) {
    screening["performed"] = false;
    screening["notice"] = "screening skipped: needs at least 3 observers, got " +
                          std::to_string(observers.size());
    notices.push_back(screening["notice"]);
  } else {
    const auto s = stats::screen_observers(records);
    kept = s.kept;
    screening["performed"] = true;
    screening["false_positive_threshold"] = s.false_positive_threshold;
    screening["non_detection_threshold"] = s.non_detection_threshold;
    screening["discarded"] = s.discarded;
    ordered_json profiles = ordered_json::array();
    for (const auto& p : s.profiles) {
      profiles.push_back({{"observer_id", p.observer_id},
                          {"n_records", p.n_records},
                          {"false_positive_rate", p.false_positive_rate},
                          {"non_detection_rate", p.non_detection_rate},
                          {"screened_out", p.screened_out}});
    }
    screening["profiles"] = std::move(profiles);
  }
  j["screening"] = std::move(screening);

  std::vector<stats::DetectionRecord> used;
  for (const auto& r : records) {
    if (kept.contains(r.observer_id)) used.push_back(r);
  }
  auto pstats = stats::pair_statistics(used, &kept);
  if (pstats.empty()) notices.push_back("no hit records: per-pair statistics are empty");

  ordered_json tc;
  std::optional<double> t_crit = options.t_crit;
  if (t_crit) {
    tc["value"] = *t_crit;
    tc["source"] = "override";
  } else {
    std::vector<double> modes;
    for (const auto& s : pstats) modes.push_back(s.mode_s);
    try {
      const auto ct = stats::find_critical_time(modes);
      t_crit = ct.t_crit;
      if (!t_crit) notices.push_back("per-pair modes are unimodal: no cluster split");
    } catch (const ValidationError& e) {
      notices.push_back(std::string("critical time unavailable: ") + e.what());
    }
    tc["value"] = t_crit ? ordered_json(*t_crit) : ordered_json(nullptr);
    tc["source"] = t_crit ? "data" : "none";
  }
  j["t_crit"] = std::move(tc);
  if (t_crit) stats::split_clusters(pstats, *t_crit);

  ordered_json jp = ordered_json::array();
  ordered_json c1 = ordered_json::array(), c2 = ordered_json::array();
  std::map<std::string, double> reference;
  for (const auto& s : pstats) {
    reference[s.pair_id] = s.mode_s;
    ordered_json e;
    e["pair_id"] = s.pair_id;
    e["n_hits"] = s.times.size();
    e["mean_s"] = s.mean_s;
    e["mode_s"] = s.mode_s;
    e["degenerate"] = s.degenerate;
    e["cluster"] = s.cluster ? ordered_json(to_string(*s.cluster)) : ordered_json(nullptr);
    e["timeouts"] = s.timeouts;
    e["false_positives"] = s.false_positives;
    e["presentations"] = s.presentations;
    e["mean_sequence_index"] = s.mean_sequence_index;
    jp.push_back(std::move(e));
    if (s.cluster) (*s.cluster == stats::Cluster::C1 ? c1 : c2).push_back(s.pair_id);
  }
  j["pairs"] = std::move(jp);
  j["clusters"] = {{"C1", std::move(c1)}, {"C2", std::move(c2)}};

  ordered_json signs = ordered_json::array();
  if (!reference.empty()) {
    for (const auto& s : stats::consistency_sign_test(used, reference, options.min_sign_test_hits)) {
      ordered_json e;
      e["observer_id"] = s.observer_id;
      e["n_faster"] = s.n_faster;
      e["n_slower"] = s.n_slower;
      e["n_ties"] = s.n_ties;
      e["direction"] = to_string(s.direction);
      e["p_value"] = s.p_value;
      e["skipped"] = s.skipped;
      if (!s.notice.empty()) e["notice"] = s.notice;
      signs.push_back(std::move(e));
    }
  }
  j["sign_tests"] = std::move(signs);

  ordered_json rank;
  std::vector<double> ranks, modes;
  for (const auto& s : pstats) {
    ranks.push_back(s.mean_sequence_index);
    modes.push_back(s.mode_s);
  }
  try {
    const double r = stats::plcc(ranks, modes);
    rank = {{"r", r}, {"p_value", stats::correlation_p_value(r, ranks.size())}, {"n", ranks.size()}};
  } catch (const ValidationError& e) {
    rank = nullptr;
    notices.push_back(std::string("rank-vs-mode correlation unavailable: ") + e.what());
  }
  j["rank_mode_correlation"] = std::move(rank);
  j["notices"] = std::move(notices);
  return j.dump(2) + "\n";
}

}  // namespace changeblind::pipeline
