#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "changeblind/classifier.hpp"
#include "changeblind/clutter.hpp"
#include "changeblind/dataset.hpp"
#include "changeblind/regression.hpp"

namespace changeblind::pipeline {

/// Observers retained for analysis: screening when at least three observers
/// contributed records, everyone otherwise.
std::set<std::string> retained_observers(std::span<const stats::DetectionRecord> records);

/// Per-pair f_UE from the presentation indices of the given observers.
std::map<std::string, double> user_experience_by_pair(std::span<const stats::DetectionRecord> records,
                                                      const std::set<std::string>& observers);

struct ExtractOptions {
  bool baselines = true;
  features::ClutterConfig clutter;
};

struct ExtractResult {
  std::vector<features::FeatureVector> rows;  // sorted by pair_id
  std::vector<data::Issue> errors;
};

/// Features of every valid pair. f_UE comes from the retained observers'
/// records and is left empty for pairs nobody has seen.
ExtractResult extract_features(const data::BenchmarkDataset& ds, const ExtractOptions& options = {});

enum class Target { mode, indiv };
std::string_view to_string(Target t);
Target parse_target(std::string_view s);

struct RegressionData {
  std::vector<std::string> ids;  // pair id, or "observer:pair" for indiv
  std::vector<model::ModelFeatures> x;
  std::vector<double> y;
};

/// mode: one row per pair with hits (dominant mode of the retained
/// observers' hit times). indiv: one row per retained hit record, with
/// f_UE = sequence_index^2.
RegressionData regression_data(std::span<const features::FeatureVector> rows,
                               std::span<const stats::DetectionRecord> records, Target target);

/// Rows joined with an explicit pair_id,target CSV.
RegressionData regression_data(std::span<const features::FeatureVector> rows,
                               const std::map<std::string, double>& targets);
std::map<std::string, double> read_targets_csv(std::istream& in);

struct ClassificationData {
  std::vector<std::string> ids;
  Eigen::MatrixXd x;  // columns f_cm, f_si, f_ue
  std::vector<stats::Cluster> labels;
  double t_crit = 0.0;
  bool t_crit_from_data = true;
};

/// Easy/hard labels from the per-pair modes. Throws ValidationError when no
/// override is given and the modes show no cluster split.
ClassificationData classification_data(std::span<const features::FeatureVector> rows,
                                       std::span<const stats::DetectionRecord> records,
                                       std::optional<double> t_crit = std::nullopt);

/// PLCC/SROCC of each available feature column against the targets.
std::vector<model::FeatureCorrelation> feature_correlations(
    std::span<const features::FeatureVector> rows, const std::map<std::string, double>& targets);

struct AnalyzeOptions {
  std::optional<double> t_crit;
  std::size_t min_sign_test_hits = 8;
};

/// Observer analysis report (JSON): screening, per-pair statistics, the
/// critical time and clusters, sign tests and the rank-vs-mode correlation.
/// Throws ValidationError on an empty record set.
std::string analyze_observers(std::span<const stats::DetectionRecord> records,
                              const AnalyzeOptions& options = {});

}  // namespace changeblind::pipeline
