#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "changeblind/observer_stats.hpp"

namespace changeblind::model {

using stats::Cluster;

/// Gaussian class-conditional model with a covariance per class.
struct QdaClass {
  Cluster label = Cluster::C1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double prior = 0.0;
  double regularization = 0.0;  // lambda added to the diagonal, 0 if none
};

struct QdaModel {
  std::vector<QdaClass> classes;  // C1 first

  /// log prior - 0.5 log|S| - 0.5 (x - m)' S^-1 (x - m)
  double discriminant(const QdaClass& c, const Eigen::VectorXd& x) const;
};

/// Binary tree with axis-aligned splits; x[feature] <= threshold goes left.
struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Cluster label = Cluster::C2;
  std::size_t n_c1 = 0;
  std::size_t n_c2 = 0;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t internal_nodes() const;
};

enum class ClassifierKind { qda, tree };
std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::qda;
  std::variant<QdaModel, TreeModel> model;
};

/// Rows of `x` are samples. Each class needs at least dim + 2 samples; a
/// covariance that is not positive definite is regularised with
/// lambda = 1e-6 * trace / dim. Throws ValidationError for single-class data.
ClassifierModel fit_qda(const Eigen::MatrixXd& x, std::span<const Cluster> labels);

/// Best-first CART growth on Gini impurity decrease, stopping at
/// max_internal_nodes or when no split improves purity. Ties go to the
/// lowest feature index, then the lowest threshold. Leaf ties go to C2.
ClassifierModel fit_tree(const Eigen::MatrixXd& x, std::span<const Cluster> labels,
                         std::size_t max_internal_nodes = 4);

/// Higher posterior wins; exact ties go to C2.
Cluster classify(const ClassifierModel& m, const Eigen::VectorXd& x);

double training_accuracy(const ClassifierModel& m, const Eigen::MatrixXd& x,
                         std::span<const Cluster> labels);

std::string classifier_to_json(const ClassifierModel& m);
ClassifierModel classifier_from_json(const std::string& text);

struct ClassifierCvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 1;
  std::size_t max_internal_nodes = 4;
  std::size_t max_attempts = 10;
};

struct AccuracyReport {
  ClassifierKind kind = ClassifierKind::qda;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t attempts = 0;
  std::size_t n_samples = 0;
  std::vector<double> fold_accuracy;
  double accuracy = 0.0;  // mean over folds
};

/// Stratified k-fold cross-validation. Folds are dealt round-robin over a
/// per-class shuffled order; when a training fold lacks a class the data are
/// refolded with the next attempt seed (up to max_attempts).
AccuracyReport cross_validate_classifier(const Eigen::MatrixXd& x, std::span<const Cluster> labels,
                                         ClassifierKind kind, const ClassifierCvOptions& options = {});

}  // namespace changeblind::model
