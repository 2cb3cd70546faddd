#include <gtest/gtest.h>

#include <random>

#include "changeblind/classifier.hpp"
#include "changeblind/error.hpp"
#include "oracles.hpp"

using namespace changeblind;
using namespace changeblind::model;

namespace {

struct Data {
  Eigen::MatrixXd x;
  std::vector<Cluster> y;
};

Data clouds(std::size_t n, double sep, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Data d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), 3), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const bool c1 = i % 2 == 0;
    for (int j = 0; j < 3; ++j) d.x(static_cast<Eigen::Index>(i), j) = g(rng) + (c1 ? 0.0 : sep);
    d.y.push_back(c1 ? Cluster::C1 : Cluster::C2);
  }
  return d;
}

Cluster flip(Cluster c) { return c == Cluster::C1 ? Cluster::C2 : Cluster::C1; }

}  // namespace

TEST(Qda, SeparableCloudsTrainPerfectly) {
  const Data d = clouds(200, 20.0, 1);
  EXPECT_EQ(training_accuracy(fit_qda(d.x, d.y), d.x, d.y), 1.0);
  EXPECT_EQ(training_accuracy(fit_tree(d.x, d.y), d.x, d.y), 1.0);
}

TEST(Qda, ExactTieGoesToC2) {
  QdaModel q;
  q.classes.push_back({Cluster::C1, Eigen::Vector2d(-1, 0), Eigen::Matrix2d::Identity(), 0.5, 0});
  q.classes.push_back({Cluster::C2, Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity(), 0.5, 0});
  const ClassifierModel m{ClassifierKind::qda, q};
  EXPECT_EQ(classify(m, Eigen::Vector2d(0, 3)), Cluster::C2);
  EXPECT_EQ(classify(m, Eigen::Vector2d(-0.1, 0)), Cluster::C1);
}

TEST(Qda, LabelSwapSwapsPredictions) {
  const Data d = clouds(60, 1.0, 2);
  std::vector<Cluster> swapped;
  for (Cluster c : d.y) swapped.push_back(flip(c));
  const auto a = fit_qda(d.x, d.y);
  const auto b = fit_qda(d.x, swapped);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.5, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p(g(rng), g(rng), g(rng));
    const auto& qa = std::get<QdaModel>(a.model);
    const double margin = qa.discriminant(qa.classes[0], p) - qa.discriminant(qa.classes[1], p);
    if (std::abs(margin) < 1e-9) continue;
    EXPECT_EQ(classify(b, p), flip(classify(a, p)));
  }
}

TEST(Qda, SingleClassAndTooFewSamples) {
  Data d = clouds(20, 5.0, 3);
  std::vector<Cluster> one(20, Cluster::C1);
  EXPECT_THROW(fit_qda(d.x, one), ValidationError);
  EXPECT_THROW(fit_tree(d.x, one), ValidationError);
  EXPECT_THROW(fit_qda(d.x.topRows(6), std::span(d.y).first(6)), ValidationError);
}

TEST(Tree, OneDimensionalThresholdAtMidpoint) {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 7, 8, 9;
  const std::vector<Cluster> y = {Cluster::C1, Cluster::C1, Cluster::C1,
                                  Cluster::C2, Cluster::C2, Cluster::C2};
  const auto m = fit_tree(x, y);
  const auto& t = std::get<TreeModel>(m.model);
  EXPECT_EQ(t.internal_nodes(), 1u);
  EXPECT_EQ(t.nodes[0].threshold, 5.0);
  EXPECT_EQ(training_accuracy(m, x, y), 1.0);
}

TEST(Tree, XorWithOneSplitMatchesExhaustiveOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 200;
  Eigen::MatrixXd x(n, 2);
  std::vector<Cluster> y;
  std::vector<std::vector<double>> ox;
  std::vector<int> oy;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    const bool c1 = (x(i, 0) > 0) != (x(i, 1) > 0);
    y.push_back(c1 ? Cluster::C1 : Cluster::C2);
    ox.push_back({x(i, 0), x(i, 1)});
    oy.push_back(c1 ? 1 : 0);
  }
  const auto m = fit_tree(x, y, 1);
  const double acc = training_accuracy(m, x, y);
  // no single axis split does better than 75%, and the tree cannot beat the best one
  const double best = oracle::best_single_split_accuracy(ox, oy);
  EXPECT_LE(best, 0.75);
  EXPECT_LE(acc, best + 1e-12);
  EXPECT_EQ(std::get<TreeModel>(m.model).internal_nodes(), 1u);
}

TEST(Tree, NodeBudgetIsRespected) {
  const Data d = clouds(100, 0.5, 6);
  for (std::size_t k : {1u, 2u, 4u}) EXPECT_LE(std::get<TreeModel>(fit_tree(d.x, d.y, k).model).internal_nodes(), k);
}

TEST(ClassifierJson, RoundTripPredictsTheSame) {
  const Data d = clouds(80, 1.5, 7);
  for (const auto& m : {fit_qda(d.x, d.y), fit_tree(d.x, d.y)}) {
    const auto back = classifier_from_json(classifier_to_json(m));
    EXPECT_EQ(classifier_to_json(back), classifier_to_json(m));
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      EXPECT_EQ(classify(back, d.x.row(i).transpose()), classify(m, d.x.row(i).transpose()));
    }
  }
  EXPECT_THROW(classifier_from_json("{\"kind\":\"svm\"}"), ValidationError);
}

TEST(ClassifierCv, SeparableIsPerfect) {
  const Data d = clouds(200, 20.0, 8);
  for (auto kind : {ClassifierKind::qda, ClassifierKind::tree}) {
    const auto r = cross_validate_classifier(d.x, d.y, kind);
    EXPECT_EQ(r.fold_accuracy.size(), 10u);
    EXPECT_EQ(r.accuracy, 1.0);
  }
}

TEST(ClassifierCv, RandomLabelsNearChance) {
  const Data d = clouds(100, 0.0, 9);
  std::vector<Cluster> y = d.y;
  std::mt19937_64 rng(9);
  std::shuffle(y.begin(), y.end(), rng);
  for (auto kind : {ClassifierKind::qda, ClassifierKind::tree}) {
    const auto r = cross_validate_classifier(d.x, y, kind);
    EXPECT_GE(r.accuracy, 0.3);
    EXPECT_LE(r.accuracy, 0.7);
  }
}

TEST(ClassifierCv, ReproducibleAndLeaveOneOut) {
  const Data d = clouds(60, 1.0, 10);
  ClassifierCvOptions o;
  o.seed = 11;
  const auto a = cross_validate_classifier(d.x, d.y, ClassifierKind::tree, o);
  const auto b = cross_validate_classifier(d.x, d.y, ClassifierKind::tree, o);
  EXPECT_EQ(a.fold_accuracy, b.fold_accuracy);

  const Data small = clouds(10, 10.0, 12);
  const auto loo = cross_validate_classifier(small.x, small.y, ClassifierKind::tree);
  EXPECT_EQ(loo.fold_accuracy.size(), 10u);
  for (double v : loo.fold_accuracy) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(ClassifierCv, Errors) {
  const Data d = clouds(8, 1.0, 13);
  EXPECT_THROW(cross_validate_classifier(d.x, d.y, ClassifierKind::tree), ValidationError);
  EXPECT_THROW(parse_classifier_kind("svm"), ValidationError);
}
