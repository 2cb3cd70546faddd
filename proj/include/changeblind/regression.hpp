#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "changeblind/features.hpp"

namespace changeblind::model {

/// The three model inputs of one sample.
struct ModelFeatures {
  double f_cm = 0.0;
  double f_si = 0.0;
  double f_ue = 0.0;
};

/// Throws ValidationError when f_ue is missing.
ModelFeatures model_features(const features::FeatureVector& fv);

/// T = b1 * f_cm + b2 * f_si + b3 * f_ue (+ intercept when enabled).
struct RegressionModel {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  bool has_intercept = false;
  double intercept = 0.0;

  friend bool operator==(const RegressionModel&, const RegressionModel&) = default;
};

struct FitOptions {
  /// Off by default: the model has no constant term.
  bool intercept = false;
};

/// Least-squares fit. Throws ValidationError for n < 3 or mismatched lengths
/// and SingularityError naming the dependent columns when the design matrix
/// is rank deficient.
RegressionModel fit_linear(std::span<const ModelFeatures> x, std::span<const double> targets,
                           const FitOptions& options = {});

double predict(const RegressionModel& m, const ModelFeatures& x);

std::string model_to_json(const RegressionModel& m);
RegressionModel model_from_json(const std::string& text);

struct CrossValidationOptions {
  std::size_t n_splits = 100;
  double train_fraction = 0.7;
  std::uint64_t seed = 1;
  FitOptions fit;
};

struct SplitResult {
  std::uint64_t attempt = 0;  // re-draws needed to obtain a unique partition
  std::vector<std::size_t> test_indices;  // sorted
  RegressionModel model;
  double plcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;
  /// Williams' test p-values (model vs single feature, PLCC), keyed by
  /// feature name; absent when the feature is constant on the split.
  std::map<std::string, double> williams_p;
};

struct EvaluationReport {
  std::string target;  // "mode" or "indiv"
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::size_t n_splits = 0;
  double train_fraction = 0.0;
  std::size_t n_train = 0;
  std::vector<SplitResult> per_split;
  /// Fisher-z averages of the per-split values and arithmetic mean RMSE.
  double plcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;
  /// Mean Williams' p-value per feature across splits.
  std::map<std::string, double> mean_williams_p;
};

/// Per-split correlations are saturated to this magnitude so Fisher's z
/// stays finite when a split is predicted perfectly.
inline constexpr double kMaxSplitCorrelation = 1.0 - 1e-12;

/// Repeated unique random train/test partitions. Split k draws its
/// partition from a stream seeded by (seed, k, attempt); the attempt is
/// incremented while the sorted training set repeats an earlier split.
EvaluationReport cross_validate_regression(std::span<const ModelFeatures> x,
                                           std::span<const double> targets,
                                           const CrossValidationOptions& options = {},
                                           std::string target_name = "mode");

std::string report_to_json(const EvaluationReport& r);
void write_report_csv(std::ostream& out, const EvaluationReport& r);

/// Correlation of one feature with the target over the whole set
/// (PLCC/SROCC), the per-feature table of the evaluation report.
struct FeatureCorrelation {
  std::string feature;
  double plcc = 0.0;
  double srocc = 0.0;
  std::size_t n = 0;
};

}  // namespace changeblind::model
