#include "changeblind/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "changeblind/correlation.hpp"
#include "changeblind/csv.hpp"
#include "changeblind/error.hpp"
#include "changeblind/rng.hpp"
#include "json.hpp"

namespace changeblind::model {

ModelFeatures model_features(const features::FeatureVector& fv) {
  if (!fv.f_ue) throw ValidationError("pair " + fv.pair_id + " has no f_ue value");
  return {fv.f_cm, fv.f_si, *fv.f_ue};
}

namespace {

constexpr const char* kColumnNames[] = {"f_cm", "f_si", "f_ue", "intercept"};

}  // namespace

RegressionModel fit_linear(std::span<const ModelFeatures> x, std::span<const double> targets,
                           const FitOptions& options) {
  if (x.size() != targets.size()) {
    throw ValidationError("fit_linear: feature and target counts differ");
  }
  const Eigen::Index p = options.intercept ? 4 : 3;
  if (x.size() < 3 || static_cast<Eigen::Index>(x.size()) < p) {
    throw ValidationError("fit_linear: needs at least " + std::to_string(p) + " samples");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ModelFeatures& f = x[static_cast<std::size_t>(i)];
    design(i, 0) = f.f_cm;
    design(i, 1) = f.f_si;
    design(i, 2) = f.f_ue;
    if (options.intercept) design(i, 3) = 1.0;
    y(i) = targets[static_cast<std::size_t>(i)];
    if (!design.row(i).allFinite() || !std::isfinite(y(i))) {
      throw InputDomainError("fit_linear: non-finite value in row " + std::to_string(i));
    }
  }
  // Column equilibration keeps the rank decision independent of units.
  Eigen::VectorXd norms = design.colwise().norm();
  std::vector<std::string> zero_cols;
  for (Eigen::Index c = 0; c < p; ++c) {
    if (norms(c) == 0.0) zero_cols.emplace_back(kColumnNames[c]);
  }
  if (!zero_cols.empty()) {
    std::string names;
    for (const auto& s : zero_cols) names += (names.empty() ? "" : ", ") + s;
    throw SingularityError("design matrix is rank deficient: all-zero column(s) " + names);
  }
  const Eigen::MatrixXd scaled = design * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      names += (names.empty() ? "" : ", ") + std::string(kColumnNames[perm(k)]);
    }
    throw SingularityError("design matrix is rank deficient: column(s) " + names +
                           " depend on the others");
  }
  const Eigen::VectorXd beta = qr.solve(y).cwiseQuotient(norms);
  RegressionModel m;
  m.b1 = beta(0);
  m.b2 = beta(1);
  m.b3 = beta(2);
  m.has_intercept = options.intercept;
  m.intercept = options.intercept ? beta(3) : 0.0;
  return m;
}

double predict(const RegressionModel& m, const ModelFeatures& x) {
  return m.b1 * x.f_cm + m.b2 * x.f_si + m.b3 * x.f_ue + (m.has_intercept ? m.intercept : 0.0);
}

std::string model_to_json(const RegressionModel& m) {
  nlohmann::ordered_json j;
  j["kind"] = "linear";
  j["b1"] = m.b1;
  j["b2"] = m.b2;
  j["b3"] = m.b3;
  j["intercept"] = m.has_intercept ? nlohmann::ordered_json(m.intercept)
                                   : nlohmann::ordered_json(nullptr);
  return j.dump(2);
}

RegressionModel model_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("kind", std::string()) != "linear") {
      throw ValidationError("model file is not a linear model");
    }
    RegressionModel m;
    m.b1 = j.at("b1").get<double>();
    m.b2 = j.at("b2").get<double>();
    m.b3 = j.at("b3").get<double>();
    if (j.contains("intercept") && !j["intercept"].is_null()) {
      m.has_intercept = true;
      m.intercept = j["intercept"].get<double>();
    }
    for (double v : {m.b1, m.b2, m.b3, m.intercept}) {
      if (!std::isfinite(v)) throw ValidationError("model coefficients must be finite");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model schema mismatch: ") + e.what());
  }
}

namespace {

struct IndexSetHash {
  std::size_t operator()(const std::vector<std::size_t>& v) const {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::size_t i : v) h = mix64(h ^ i);
    return static_cast<std::size_t>(h);
  }
};

// Number of distinct training sets, saturated at 1e18.
double partition_count(std::size_t n, std::size_t k) {
  double c = 1.0;
  k = std::min(k, n - k);
  for (std::size_t i = 0; i < k; ++i) {
    c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c > 1e18) return 1e18;
  }
  return std::round(c);
}

double saturate(double r) { return std::clamp(r, -kMaxSplitCorrelation, kMaxSplitCorrelation); }

}  // namespace

EvaluationReport cross_validate_regression(std::span<const ModelFeatures> x,
                                           std::span<const double> targets,
                                           const CrossValidationOptions& options,
                                           std::string target_name) {
  if (x.size() != targets.size()) {
    throw ValidationError("cross-validation: feature and target counts differ");
  }
  const std::size_t n = x.size();
  if (n < 10) throw ValidationError("cross-validation needs at least 10 samples");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  if (options.n_splits == 0) throw ValidationError("at least one split is required");
  const auto n_train = static_cast<std::size_t>(std::lround(options.train_fraction * n));
  if (n_train < 4 || n - n_train < 4) {
    throw ValidationError("train/test partition leaves fewer than 4 samples on one side");
  }
  if (static_cast<double>(options.n_splits) > partition_count(n, n_train)) {
    throw ValidationError("requested " + std::to_string(options.n_splits) +
                          " unique splits but only " +
                          csv::format_double(partition_count(n, n_train)) + " exist");
  }

  EvaluationReport report;
  report.target = std::move(target_name);
  report.seed = options.seed;
  report.n_samples = n;
  report.n_splits = options.n_splits;
  report.train_fraction = options.train_fraction;
  report.n_train = n_train;

  std::unordered_set<std::vector<std::size_t>, IndexSetHash> seen;
  std::vector<double> plccs, sroccs;
  std::map<std::string, std::pair<double, std::size_t>> williams_acc;
  for (std::size_t split = 0; split < options.n_splits; ++split) {
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> train;
    std::uint64_t attempt = 0;
    for (;; ++attempt) {
      Rng rng(derive_seed(options.seed, {split, attempt}));
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(std::span<std::size_t>(order), rng);
      train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
      std::sort(train.begin(), train.end());
      if (seen.insert(train).second) break;
    }
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(test.begin(), test.end());

    std::vector<ModelFeatures> train_x;
    std::vector<double> train_y;
    for (std::size_t i : train) {
      train_x.push_back(x[i]);
      train_y.push_back(targets[i]);
    }
    SplitResult s;
    s.attempt = attempt;
    s.model = fit_linear(train_x, train_y, options.fit);
    std::vector<double> pred, truth, cm, si, ue;
    for (std::size_t i : test) {
      pred.push_back(predict(s.model, x[i]));
      truth.push_back(targets[i]);
      cm.push_back(x[i].f_cm);
      si.push_back(x[i].f_si);
      ue.push_back(x[i].f_ue);
    }
    s.plcc = saturate(stats::plcc(pred, truth));
    s.srocc = saturate(stats::srocc(pred, truth));
    s.rmse = stats::rmse(pred, truth);
    const std::pair<const char*, std::vector<double>*> feats[] = {
        {"f_cm", &cm}, {"f_si", &si}, {"f_ue", &ue}};
    for (const auto& [name, col] : feats) {
      try {
        double r_feat = stats::plcc(*col, truth);
        double r_kh = stats::plcc(pred, *col);
        // Orient each feature so it is compared as a predictor.
        if (r_feat < 0.0) {
          r_feat = -r_feat;
          r_kh = -r_kh;
        }
        const double p = stats::williams_test(s.plcc, r_feat, r_kh, truth.size()).p_value;
        s.williams_p[name] = p;
        williams_acc[name].first += p;
        williams_acc[name].second += 1;
      } catch (const UndefinedCorrelationError&) {
      }
    }
    s.test_indices = std::move(test);
    plccs.push_back(s.plcc);
    sroccs.push_back(s.srocc);
    report.rmse += s.rmse;
    report.per_split.push_back(std::move(s));
  }
  report.plcc = stats::fisher_z_average(plccs);
  report.srocc = stats::fisher_z_average(sroccs);
  report.rmse /= static_cast<double>(options.n_splits);
  for (const auto& [name, acc] : williams_acc) {
    report.mean_williams_p[name] = acc.first / static_cast<double>(acc.second);
  }
  return report;
}

std::string report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = "regression_evaluation";
  j["target"] = r.target;
  j["seed"] = r.seed;
  j["n_samples"] = r.n_samples;
  j["n_splits"] = r.n_splits;
  j["train_fraction"] = r.train_fraction;
  j["n_train"] = r.n_train;
  j["averaged"] = {{"plcc", r.plcc}, {"srocc", r.srocc}, {"rmse", r.rmse}};
  j["mean_williams_p"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.mean_williams_p) j["mean_williams_p"][k] = v;
  nlohmann::ordered_json splits = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.per_split.size(); ++i) {
    const SplitResult& s = r.per_split[i];
    nlohmann::ordered_json e;
    e["split"] = i;
    e["attempt"] = s.attempt;
    e["plcc"] = s.plcc;
    e["srocc"] = s.srocc;
    e["rmse"] = s.rmse;
    e["coefficients"] = {s.model.b1, s.model.b2, s.model.b3};
    if (s.model.has_intercept) e["intercept"] = s.model.intercept;
    e["williams_p"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.williams_p) e["williams_p"][k] = v;
    e["test_indices"] = s.test_indices;
    splits.push_back(std::move(e));
  }
  j["per_split"] = std::move(splits);
  return j.dump(2);
}

void write_report_csv(std::ostream& out, const EvaluationReport& r) {
  out << "split,plcc,srocc,rmse,b1,b2,b3\n";
  for (std::size_t i = 0; i < r.per_split.size(); ++i) {
    const SplitResult& s = r.per_split[i];
    out << i << ',' << csv::format_double(s.plcc) << ',' << csv::format_double(s.srocc) << ','
        << csv::format_double(s.rmse) << ',' << csv::format_double(s.model.b1) << ','
        << csv::format_double(s.model.b2) << ',' << csv::format_double(s.model.b3) << '\n';
  }
}

}  // namespace changeblind::model
