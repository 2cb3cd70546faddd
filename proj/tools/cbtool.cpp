// cbtool: command-line front end for the change-blindness toolkit.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "changeblind/classifier.hpp"
#include "changeblind/csv.hpp"
#include "changeblind/dataset.hpp"
#include "changeblind/error.hpp"
#include "changeblind/pipeline.hpp"
#include "changeblind/regression.hpp"
#include "changeblind/sequence.hpp"
#include "changeblind/service.hpp"
#include "changeblind/synthetic.hpp"
#include "json.hpp"

namespace cb = changeblind;
namespace fs = std::filesystem;

namespace {

struct Args {
  std::string dataset;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t splits = 100;
  double train_fraction = 0.7;
  std::optional<double> t_crit;
  std::vector<std::string> classifiers;
  std::string target = "mode";
  std::string bind = "127.0.0.1:8080";
  std::string features;
  std::string records;
  std::string targets;
  std::string model;
  std::string plan;
  bool intercept = false;
  bool no_baselines = false;
  std::size_t folds = 10;
  std::size_t n_pairs = 100;
  std::size_t n_observers = 30;
  std::size_t length = 0;
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    cb::data::write_text_file(path, text);
  }
}

std::vector<cb::features::FeatureVector> load_features(const std::string& path) {
  if (path.empty()) throw cb::ValidationError("--features is required");
  if (fs::path(path).extension() == ".json") {
    return cb::features::features_from_json(cb::data::read_text_file(path));
  }
  std::ifstream in(path);
  if (!in) throw cb::IoError("cannot open " + path);
  return cb::features::read_feature_csv(in);
}

// Records from --records, else from the dataset's record store.
std::vector<cb::stats::DetectionRecord> load_records(const Args& a) {
  if (!a.records.empty()) return cb::stats::read_records_file(a.records);
  if (!a.dataset.empty()) {
    const auto m = cb::data::manifest_from_json(
        cb::data::read_text_file(fs::path(a.dataset) / cb::data::kManifestFile));
    const fs::path p = fs::path(a.dataset) / m.records;
    if (!fs::exists(p)) return {};
    return cb::stats::read_records_file(p.string());
  }
  throw cb::ValidationError("--records or --dataset is required");
}

cb::pipeline::RegressionData load_regression_data(const Args& a) {
  const auto rows = load_features(a.features);
  if (!a.targets.empty()) {
    std::ifstream in(a.targets);
    if (!in) throw cb::IoError("cannot open " + a.targets);
    return cb::pipeline::regression_data(rows, cb::pipeline::read_targets_csv(in));
  }
  return cb::pipeline::regression_data(rows, load_records(a), cb::pipeline::parse_target(a.target));
}

void print_issues(const std::vector<cb::data::Issue>& issues, const char* kind) {
  for (const auto& i : issues) std::cerr << kind << ": " << i.subject << ": " << i.message << '\n';
}

int cmd_extract(const Args& a) {
  if (a.dataset.empty()) throw cb::ValidationError("--dataset is required");
  const auto ds = cb::data::load_dataset(a.dataset);
  print_issues(ds.warnings, "warning");
  cb::pipeline::ExtractOptions opt;
  opt.baselines = !a.no_baselines;
  const auto res = cb::pipeline::extract_features(ds, opt);
  std::ostringstream out;
  if (fs::path(a.out).extension() == ".json") {
    out << cb::features::features_to_json(res.rows) << '\n';
  } else {
    cb::features::write_feature_csv(out, res.rows);
  }
  write_output(a.out, out.str());
  print_issues(res.errors, "error");
  return res.errors.empty() ? 0 : 1;
}

int cmd_fit(const Args& a) {
  const auto d = load_regression_data(a);
  cb::model::FitOptions fo;
  fo.intercept = a.intercept;
  const auto m = cb::model::fit_linear(d.x, d.y, fo);
  write_output(a.out, cb::model::model_to_json(m) + "\n");
  return 0;
}

int cmd_predict(const Args& a) {
  if (a.model.empty()) throw cb::ValidationError("--model is required");
  const auto m = cb::model::model_from_json(cb::data::read_text_file(a.model));
  std::ostringstream out;
  out << "pair_id,prediction\n";
  for (const auto& fv : load_features(a.features)) {
    out << fv.pair_id << ',' << cb::csv::format_double(cb::model::predict(m, cb::model::model_features(fv)))
        << '\n';
  }
  write_output(a.out, out.str());
  return 0;
}

int cmd_evaluate(const Args& a) {
  const auto d = load_regression_data(a);
  cb::model::CrossValidationOptions o;
  o.n_splits = a.splits;
  o.train_fraction = a.train_fraction;
  o.seed = a.seed;
  o.fit.intercept = a.intercept;
  const auto report = cb::model::cross_validate_regression(
      d.x, d.y, o, a.targets.empty() ? std::string(a.target) : std::string("file"));
  if (fs::path(a.out).extension() == ".csv") {
    std::ostringstream out;
    cb::model::write_report_csv(out, report);
    write_output(a.out, out.str());
  } else {
    write_output(a.out, cb::model::report_to_json(report) + "\n");
  }
  return 0;
}

int cmd_classify(const Args& a) {
  const auto rows = load_features(a.features);
  const auto d = cb::pipeline::classification_data(rows, load_records(a), a.t_crit);
  std::vector<std::string> kinds = a.classifiers;
  if (kinds.empty()) kinds = {"qda", "tree"};
  nlohmann::ordered_json j;
  j["kind"] = "classification_evaluation";
  j["seed"] = a.seed;
  j["k"] = a.folds;
  j["t_crit"] = d.t_crit;
  j["t_crit_source"] = d.t_crit_from_data ? "data" : "override";
  j["n_samples"] = d.ids.size();
  std::size_t n_c1 = 0;
  for (auto l : d.labels) n_c1 += l == cb::stats::Cluster::C1 ? 1 : 0;
  j["class_counts"] = {{"C1", n_c1}, {"C2", d.labels.size() - n_c1}};
  nlohmann::ordered_json results = nlohmann::ordered_json::array();
  for (const auto& k : kinds) {
    cb::model::ClassifierCvOptions o;
    o.k = a.folds;
    o.seed = a.seed;
    const auto r = cb::model::cross_validate_classifier(d.x, d.labels, cb::model::parse_classifier_kind(k), o);
    results.push_back({{"classifier", cb::model::to_string(r.kind)},
                       {"accuracy", r.accuracy},
                       {"attempts", r.attempts},
                       {"fold_accuracy", r.fold_accuracy}});
  }
  j["results"] = std::move(results);
  write_output(a.out, j.dump(2) + "\n");
  return 0;
}

int cmd_analyze(const Args& a) {
  cb::pipeline::AnalyzeOptions o;
  o.t_crit = a.t_crit;
  write_output(a.out, cb::pipeline::analyze_observers(load_records(a), o));
  return 0;
}

int cmd_sequences(const Args& a) {
  if (a.dataset.empty()) throw cb::ValidationError("--dataset is required");
  const auto m = cb::data::manifest_from_json(
      cb::data::read_text_file(fs::path(a.dataset) / cb::data::kManifestFile));
  std::vector<std::string> ids;
  for (const auto& p : m.pairs) ids.push_back(p.id);
  const std::size_t n_obs = a.n_observers;
  const std::vector<std::size_t> lengths(n_obs, a.length == 0 ? ids.size() : a.length);
  write_output(a.out, cb::data::plan_to_json(cb::data::generate_sequences(ids, lengths, a.seed)));
  return 0;
}

int cmd_synthetic(const Args& a) {
  if (a.out.empty()) throw cb::ValidationError("--out directory is required");
  cb::data::SyntheticOptions o;
  o.n_pairs = a.n_pairs;
  o.n_observers = a.n_observers;
  o.seed = a.seed;
  o.name = fs::path(a.out).filename().string();
  cb::data::write_synthetic(a.out, cb::data::make_synthetic(o));
  return 0;
}

int cmd_serve(const Args& a) {
  if (a.dataset.empty()) throw cb::ValidationError("--dataset is required");
  auto ds = cb::data::load_dataset(a.dataset);
  print_issues(ds.errors, "error");
  const fs::path plan_path = a.plan.empty() ? fs::path(a.dataset) / "plan.json" : fs::path(a.plan);
  const auto plan = cb::data::plan_from_json(cb::data::read_text_file(plan_path));
  cb::service::ServiceOptions o;
  o.seed = a.seed;
  if (const char* env = std::getenv(cb::service::kRecordStoreEnv); env && *env) o.record_store = env;
  const auto [host, port] = cb::service::parse_bind(a.bind);
  cb::service::ExperimentService svc(std::move(ds), plan, o);
  std::cerr << "serving " << plan.sequences.size() << " plan slots on " << host << ':' << port << '\n';
  cb::service::serve(svc, host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-blindness detection-time toolkit"};
  app.require_subcommand(1);
  Args a;

  auto add_out = [&](CLI::App* c, const char* what) { return c->add_option("--out", a.out, what); };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", a.seed, "Random seed")->capture_default_str(); };
  auto add_records = [&](CLI::App* c) {
    c->add_option("--records", a.records, "Detection records (.jsonl or .csv)");
    c->add_option("--dataset", a.dataset, "Dataset root (records taken from its store)");
  };
  auto add_targets = [&](CLI::App* c) {
    c->add_option("--features", a.features, "Feature table (.csv or .json)")->required();
    add_records(c);
    c->add_option("--targets", a.targets, "Explicit pair_id,target CSV instead of records");
    c->add_option("--target", a.target, "Target kind")->check(CLI::IsMember({"mode", "indiv"}))->capture_default_str();
    c->add_flag("--intercept", a.intercept, "Add an intercept column");
  };

  auto* extract = app.add_subcommand("extract-features", "Compute the feature table of a dataset");
  extract->add_option("--dataset", a.dataset, "Dataset root")->required();
  add_out(extract, "Output table (.csv, or .json); stdout if omitted");
  extract->add_flag("--no-baselines", a.no_baselines, "Skip the clutter baselines");

  auto* fit = app.add_subcommand("fit", "Fit the three-feature linear model");
  add_targets(fit);
  add_out(fit, "Model JSON");

  auto* predict = app.add_subcommand("predict", "Predict detection times");
  predict->add_option("--model", a.model, "Model JSON")->required();
  predict->add_option("--features", a.features, "Feature table")->required();
  add_out(predict, "Predictions CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Repeated random-split cross-validation");
  add_targets(evaluate);
  evaluate->add_option("--splits", a.splits, "Number of unique splits")->capture_default_str();
  evaluate->add_option("--train-fraction", a.train_fraction, "Training fraction")->capture_default_str();
  add_seed(evaluate);
  add_out(evaluate, "Report (.json or .csv)");

  auto* classify = app.add_subcommand("classify", "Easy/hard classification with k-fold CV");
  classify->add_option("--features", a.features, "Feature table")->required();
  add_records(classify);
  classify->add_option("--classifier", a.classifiers, "qda and/or tree (default: both)")
      ->check(CLI::IsMember({"qda", "tree"}));
  classify->add_option("--t-crit", a.t_crit, "Critical time override (s)");
  classify->add_option("--folds", a.folds, "Number of folds")->capture_default_str();
  add_seed(classify);
  add_out(classify, "Report JSON");

  auto* analyze = app.add_subcommand("analyze-observers", "Observer statistics report");
  add_records(analyze);
  analyze->add_option("--t-crit", a.t_crit, "Critical time override (s)");
  add_out(analyze, "Report JSON");

  auto* seqs = app.add_subcommand("generate-sequences", "Balanced presentation plan");
  seqs->add_option("--dataset", a.dataset, "Dataset root")->required();
  seqs->add_option("--observers", a.n_observers, "Number of plan slots")->capture_default_str();
  seqs->add_option("--length", a.length, "Sequence length (default: all pairs)");
  add_seed(seqs);
  add_out(seqs, "Plan JSON");

  auto* synth = app.add_subcommand("make-synthetic", "Write a synthetic benchmark");
  synth->add_option("--pairs", a.n_pairs, "Number of pairs")->capture_default_str();
  synth->add_option("--observers", a.n_observers, "Number of simulated observers")->capture_default_str();
  add_seed(synth);
  add_out(synth, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Run the experiment server");
  serve->add_option("--dataset", a.dataset, "Dataset root")->required();
  serve->add_option("--bind", a.bind, "host:port")->capture_default_str();
  serve->add_option("--plan", a.plan, "Plan JSON (default: <dataset>/plan.json)");
  add_seed(serve);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*extract) return cmd_extract(a);
    if (*fit) return cmd_fit(a);
    if (*predict) return cmd_predict(a);
    if (*evaluate) return cmd_evaluate(a);
    if (*classify) return cmd_classify(a);
    if (*analyze) return cmd_analyze(a);
    if (*seqs) return cmd_sequences(a);
    if (*synth) return cmd_synthetic(a);
    if (*serve) return cmd_serve(a);
  } catch (const cb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
