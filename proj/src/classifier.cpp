#include "changeblind/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "changeblind/error.hpp"
#include "changeblind/rng.hpp"
#include "json.hpp"

namespace changeblind::model {

std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::qda ? "qda" : "tree"; }

ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "qda") return ClassifierKind::qda;
  if (s == "tree") return ClassifierKind::tree;
  throw ValidationError("unknown classifier '" + std::string(s) + "' (expected qda or tree)");
}

namespace {

void check_inputs(const Eigen::MatrixXd& x, std::span<const Cluster> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw StructuralError("classifier: sample and label counts differ");
  }
  if (x.rows() == 0 || x.cols() == 0) throw ValidationError("classifier: empty training set");
  if (!x.allFinite()) throw InputDomainError("classifier: non-finite feature value");
  const bool has_c1 = std::find(labels.begin(), labels.end(), Cluster::C1) != labels.end();
  const bool has_c2 = std::find(labels.begin(), labels.end(), Cluster::C2) != labels.end();
  if (!has_c1 || !has_c2) throw ValidationError("classifier: training data contain a single class");
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  return llt;
}

bool positive_definite(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  return d.minCoeff() > 0.0 && d.cwiseAbs2().minCoeff() > 1e-14 * scale;
}

}  // namespace

double QdaModel::discriminant(const QdaClass& c, const Eigen::VectorXd& x) const {
  const Eigen::LLT<Eigen::MatrixXd> llt = factor(c.covariance);
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Eigen::VectorXd z = llt.matrixL().solve(x - c.mean);
  return std::log(c.prior) - 0.5 * log_det - 0.5 * z.squaredNorm();
}

ClassifierModel fit_qda(const Eigen::MatrixXd& x, std::span<const Cluster> labels) {
  check_inputs(x, labels);
  const Eigen::Index dim = x.cols();
  QdaModel qda;
  for (Cluster label : {Cluster::C1, Cluster::C2}) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) rows.push_back(static_cast<Eigen::Index>(i));
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n < dim + 2) {
      throw ValidationError("QDA: class " + std::string(stats::to_string(label)) + " has " +
                            std::to_string(n) + " samples, needs at least " +
                            std::to_string(dim + 2));
    }
    QdaClass c;
    c.label = label;
    c.mean = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index r : rows) c.mean += x.row(r).transpose();
    c.mean /= static_cast<double>(n);
    c.covariance = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index r : rows) {
      const Eigen::VectorXd d = x.row(r).transpose() - c.mean;
      c.covariance += d * d.transpose();
    }
    c.covariance /= static_cast<double>(n - 1);
    c.covariance = 0.5 * (c.covariance + c.covariance.transpose());
    if (!positive_definite(c.covariance)) {
      double lambda = 1e-6 * c.covariance.trace() / static_cast<double>(dim);
      if (lambda <= 0.0) lambda = 1e-12;
      c.covariance += lambda * Eigen::MatrixXd::Identity(dim, dim);
      c.regularization = lambda;
      if (!positive_definite(c.covariance)) {
        throw SingularityError("QDA: covariance of class " + std::string(stats::to_string(label)) +
                               " is singular even after regularisation");
      }
    }
    c.prior = static_cast<double>(n) / static_cast<double>(labels.size());
    qda.classes.push_back(std::move(c));
  }
  return {ClassifierKind::qda, std::move(qda)};
}

std::size_t TreeModel::internal_nodes() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.leaf; }));
}

namespace {

double weighted_gini(std::size_t a, std::size_t b) {
  const double n = static_cast<double>(a + b);
  if (n == 0.0) return 0.0;
  return n - (static_cast<double>(a) * a + static_cast<double>(b) * b) / n;
}

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

constexpr double kGainEpsilon = 1e-12;

SplitCandidate best_split(const Eigen::MatrixXd& x, std::span<const Cluster> labels,
                          const std::vector<std::size_t>& rows) {
  SplitCandidate best;
  std::size_t total_c1 = 0;
  for (std::size_t r : rows) total_c1 += labels[r] == Cluster::C1 ? 1 : 0;
  const std::size_t total_c2 = rows.size() - total_c1;
  const double parent = weighted_gini(total_c1, total_c2);
  if (parent <= 0.0) return best;
  std::vector<std::size_t> sorted = rows;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
    });
    std::size_t left_c1 = 0, left_c2 = 0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      (labels[sorted[i]] == Cluster::C1 ? left_c1 : left_c2)++;
      const double v = x(static_cast<Eigen::Index>(sorted[i]), f);
      const double next = x(static_cast<Eigen::Index>(sorted[i + 1]), f);
      if (v == next) continue;
      const double gain = parent - weighted_gini(left_c1, left_c2) -
                          weighted_gini(total_c1 - left_c1, total_c2 - left_c2);
      if (gain > best.gain + kGainEpsilon) {
        best = {true, static_cast<int>(f), v + (next - v) / 2.0, gain};
      }
    }
  }
  return best;
}

}  // namespace

ClassifierModel fit_tree(const Eigen::MatrixXd& x, std::span<const Cluster> labels,
                         std::size_t max_internal_nodes) {
  check_inputs(x, labels);
  TreeModel tree;
  std::vector<std::vector<std::size_t>> members;
  auto make_leaf = [&](std::vector<std::size_t> rows) {
    TreeNode node;
    for (std::size_t r : rows) (labels[r] == Cluster::C1 ? node.n_c1 : node.n_c2)++;
    node.label = node.n_c1 > node.n_c2 ? Cluster::C1 : Cluster::C2;
    tree.nodes.push_back(node);
    members.push_back(std::move(rows));
    return static_cast<int>(tree.nodes.size() - 1);
  };
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  make_leaf(std::move(all));

  while (tree.internal_nodes() < max_internal_nodes) {
    int chosen = -1;
    SplitCandidate chosen_split;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (!tree.nodes[i].leaf) continue;
      const SplitCandidate c = best_split(x, labels, members[i]);
      if (c.valid && c.gain > chosen_split.gain + kGainEpsilon) {
        chosen = static_cast<int>(i);
        chosen_split = c;
      }
    }
    if (chosen < 0) break;
    std::vector<std::size_t> left, right;
    for (std::size_t r : members[static_cast<std::size_t>(chosen)]) {
      (x(static_cast<Eigen::Index>(r), chosen_split.feature) <= chosen_split.threshold ? left : right)
          .push_back(r);
    }
    members[static_cast<std::size_t>(chosen)].clear();
    const int l = make_leaf(std::move(left));
    const int r = make_leaf(std::move(right));
    TreeNode& parent = tree.nodes[static_cast<std::size_t>(chosen)];
    parent.leaf = false;
    parent.feature = chosen_split.feature;
    parent.threshold = chosen_split.threshold;
    parent.left = l;
    parent.right = r;
  }
  return {ClassifierKind::tree, std::move(tree)};
}

Cluster classify(const ClassifierModel& m, const Eigen::VectorXd& x) {
  if (const auto* qda = std::get_if<QdaModel>(&m.model)) {
    const double d1 = qda->discriminant(qda->classes.at(0), x);
    const double d2 = qda->discriminant(qda->classes.at(1), x);
    return d1 > d2 ? Cluster::C1 : Cluster::C2;
  }
  const auto& tree = std::get<TreeModel>(m.model);
  std::size_t i = 0;
  while (!tree.nodes.at(i).leaf) {
    const TreeNode& n = tree.nodes[i];
    i = static_cast<std::size_t>(x(n.feature) <= n.threshold ? n.left : n.right);
  }
  return tree.nodes[i].label;
}

double training_accuracy(const ClassifierModel& m, const Eigen::MatrixXd& x,
                         std::span<const Cluster> labels) {
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    ok += classify(m, x.row(i).transpose()) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(x.rows());
}

namespace {

Cluster parse_cluster(const std::string& s) {
  if (s == "C1") return Cluster::C1;
  if (s == "C2") return Cluster::C2;
  throw ValidationError("unknown class label '" + s + "'");
}

}  // namespace

std::string classifier_to_json(const ClassifierModel& m) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(m.kind));
  if (const auto* qda = std::get_if<QdaModel>(&m.model)) {
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const QdaClass& c : qda->classes) {
      nlohmann::ordered_json e;
      e["label"] = std::string(stats::to_string(c.label));
      e["prior"] = c.prior;
      e["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
      nlohmann::ordered_json cov = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(c.covariance.cols()));
        for (Eigen::Index k = 0; k < c.covariance.cols(); ++k) row[static_cast<std::size_t>(k)] = c.covariance(r, k);
        cov.push_back(row);
      }
      e["covariance"] = std::move(cov);
      e["regularization"] = c.regularization;
      classes.push_back(std::move(e));
    }
    j["classes"] = std::move(classes);
  } else {
    const auto& tree = std::get<TreeModel>(m.model);
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& n : tree.nodes) {
      nlohmann::ordered_json e;
      e["leaf"] = n.leaf;
      if (!n.leaf) {
        e["feature"] = n.feature;
        e["threshold"] = n.threshold;
        e["left"] = n.left;
        e["right"] = n.right;
      }
      e["label"] = std::string(stats::to_string(n.label));
      e["n_c1"] = n.n_c1;
      e["n_c2"] = n.n_c2;
      nodes.push_back(std::move(e));
    }
    j["nodes"] = std::move(nodes);
  }
  return j.dump(2);
}

ClassifierModel classifier_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    ClassifierModel m;
    m.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    if (m.kind == ClassifierKind::qda) {
      QdaModel qda;
      for (const auto& e : j.at("classes")) {
        QdaClass c;
        c.label = parse_cluster(e.at("label").get<std::string>());
        c.prior = e.at("prior").get<double>();
        const auto mean = e.at("mean").get<std::vector<double>>();
        c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        const auto cov = e.at("covariance").get<std::vector<std::vector<double>>>();
        c.covariance.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(cov.size()));
        for (std::size_t r = 0; r < cov.size(); ++r) {
          if (cov[r].size() != cov.size()) throw ValidationError("QDA covariance must be square");
          for (std::size_t k = 0; k < cov.size(); ++k) {
            c.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = cov[r][k];
          }
        }
        c.regularization = e.value("regularization", 0.0);
        qda.classes.push_back(std::move(c));
      }
      if (qda.classes.size() != 2) throw ValidationError("QDA model needs exactly two classes");
      m.model = std::move(qda);
    } else {
      TreeModel tree;
      for (const auto& e : j.at("nodes")) {
        TreeNode n;
        n.leaf = e.at("leaf").get<bool>();
        if (!n.leaf) {
          n.feature = e.at("feature").get<int>();
          n.threshold = e.at("threshold").get<double>();
          n.left = e.at("left").get<int>();
          n.right = e.at("right").get<int>();
        }
        n.label = parse_cluster(e.at("label").get<std::string>());
        n.n_c1 = e.value("n_c1", std::size_t{0});
        n.n_c2 = e.value("n_c2", std::size_t{0});
        tree.nodes.push_back(n);
      }
      if (tree.nodes.empty()) throw ValidationError("tree model has no nodes");
      m.model = std::move(tree);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("classifier schema mismatch: ") + e.what());
  }
}

AccuracyReport cross_validate_classifier(const Eigen::MatrixXd& x, std::span<const Cluster> labels,
                                         ClassifierKind kind, const ClassifierCvOptions& options) {
  check_inputs(x, labels);
  const std::size_t n = labels.size();
  if (options.k < 2) throw ValidationError("k-fold cross-validation needs k >= 2");
  if (n < options.k) {
    throw ValidationError("k-fold cross-validation needs at least k = " +
                          std::to_string(options.k) + " samples");
  }
  AccuracyReport report;
  report.kind = kind;
  report.k = options.k;
  report.seed = options.seed;
  report.n_samples = n;

  std::vector<std::vector<std::size_t>> folds;
  bool ok = false;
  for (std::size_t attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
    report.attempts = attempt + 1;
    Rng rng(derive_seed(options.seed, {attempt}));
    folds.assign(options.k, {});
    std::size_t dealt = 0;
    for (Cluster label : {Cluster::C1, Cluster::C2}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == label) idx.push_back(i);
      }
      shuffle(std::span<std::size_t>(idx), rng);
      for (std::size_t i : idx) folds[dealt++ % options.k].push_back(i);
    }
    ok = true;
    for (const auto& fold : folds) {
      std::size_t c1_out = 0, c2_out = 0;
      for (std::size_t i : fold) (labels[i] == Cluster::C1 ? c1_out : c2_out)++;
      const std::size_t c1_total = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Cluster::C1));
      if (c1_out == c1_total || c2_out == n - c1_total) ok = false;
    }
  }
  if (!ok) {
    throw ValidationError("cross-validation: a class is absent from some training fold after " +
                          std::to_string(options.max_attempts) + " attempts");
  }

  for (const auto& fold : folds) {
    std::vector<char> in_test(n, 0);
    for (std::size_t i : fold) in_test[i] = 1;
    Eigen::MatrixXd train_x(static_cast<Eigen::Index>(n - fold.size()), x.cols());
    std::vector<Cluster> train_y;
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_test[i]) continue;
      train_x.row(row++) = x.row(static_cast<Eigen::Index>(i));
      train_y.push_back(labels[i]);
    }
    const ClassifierModel m = kind == ClassifierKind::qda
                                  ? fit_qda(train_x, train_y)
                                  : fit_tree(train_x, train_y, options.max_internal_nodes);
    std::size_t correct = 0;
    for (std::size_t i : fold) {
      correct += classify(m, x.row(static_cast<Eigen::Index>(i)).transpose()) == labels[i] ? 1 : 0;
    }
    report.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(fold.size()));
  }
  report.accuracy = std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) /
                    static_cast<double>(report.fold_accuracy.size());
  return report;
}

}  // namespace changeblind::model
