#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ratioscope/bench.hpp"
#include "ratioscope/error.hpp"
#include "ratioscope/eval.hpp"
#include "ratioscope/graph.hpp"
#include "ratioscope/model_io.hpp"
#include "ratioscope/scores.hpp"
#include "ratioscope/synth.hpp"

namespace rs = ratioscope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

// JSON config files: one object per subcommand, keys are long flag names.
//   {"bench": {"trials": 5, "dims": [10, 20]}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const CLI::App* sub : app->get_subcommands({})) {
      nlohmann::ordered_json section = nlohmann::ordered_json::object();
      for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
        if (opt->count() > 0) section[opt->get_lnames().front()] = opt->results();
        else if (default_also && !opt->get_default_str().empty())
          section[opt->get_lnames().front()] = opt->get_default_str();
      }
      doc[sub->get_name()] = std::move(section);
    }
    return doc.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' has an unsupported value");
  }

  static void flatten(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        flatten(value, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v, key));
      else
        item.inputs.push_back(scalar(value, key));
      items.push_back(std::move(item));
    }
  }
};

std::optional<double> parse_sigma2(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && v > 0.0) return v;
  } catch (const std::exception&) {
  }
  throw rs::Error(rs::ErrorKind::kInvalidArgument, "--sigma2 must be 'auto' or a positive number");
}

void add_llr_options(CLI::App* cmd, rs::LlrHyperparams& hp, std::string& sigma2) {
  cmd->add_option("--lambda1", hp.lambda1, "Network (fused) penalty weight")->capture_default_str();
  cmd->add_option("--lambda2", hp.lambda2, "Exclusive sparsity penalty weight")->capture_default_str();
  cmd->add_option("--k", hp.k_neighbors, "Neighbours per sample in the similarity graph")->capture_default_str();
  cmd->add_option("--sigma2", sigma2, "Graph kernel width squared, or 'auto'")->capture_default_str();
  cmd->add_option("--epsilon", hp.epsilon, "Smoothing of norms in the reweighting")->capture_default_str();
  cmd->add_option("--max-outer", hp.outer_max_iters, "Maximum outer iterations")->capture_default_str();
  cmd->add_option("--tol", hp.outer_rel_tol, "Relative objective change to stop at")->capture_default_str();
  cmd->add_option("--inner-max", hp.inner_max_iters, "Maximum inner iterations")->capture_default_str();
  cmd->add_option("--inner-tol", hp.inner_grad_tol, "Inner gradient tolerance")->capture_default_str();
}

// ---------------------------------------------------------------------------- synth

struct SynthArgs {
  rs::SynthSpec spec;
  std::string out_dir = ".";
};

int cmd_synth(const SynthArgs& a) {
  a.spec.validate();
  const rs::SynthData data = rs::generate(a.spec);
  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  rs::write_csv((dir / "inliers.csv").string(), data.inliers);
  rs::write_csv((dir / "test.csv").string(), data.test, &data.test_labels);
  return kExitOk;
}

// ---------------------------------------------------------------------------- fit

struct FitArgs {
  std::string inliers, test, out;
  std::string sigma2 = "auto";
  std::string graph_out;
  rs::LlrHyperparams hp;
  bool no_standardize = false;
  bool intercept = false;
};

rs::Dataset with_bias(const rs::Dataset& data) {
  Eigen::MatrixXd f(data.dim() + 1, data.size());
  f.topRows(data.dim()) = data.features();
  f.row(data.dim()).setOnes();
  auto names = data.feature_names();
  names.push_back(rs::kBiasFeature);
  return rs::Dataset(std::move(f), std::move(names), data.sample_ids());
}

int cmd_fit(FitArgs a) {
  a.hp.sigma2 = parse_sigma2(a.sigma2);
  a.hp.validate();
  rs::LabeledDataset in = rs::read_csv(a.inliers);
  rs::LabeledDataset te = rs::read_csv(a.test);
  if (in.data.dim() != te.data.dim() || in.data.feature_names() != te.data.feature_names())
    throw rs::Error(rs::ErrorKind::kDimensionMismatch, "inlier and test files have different features");

  rs::LlrModel model;
  model.standardizer = a.no_standardize ? rs::StandardizationStats::identity(in.data.dim())
                                        : rs::fit_standardizer(in.data);
  rs::Dataset inliers = rs::apply_standardizer(in.data, model.standardizer);
  rs::Dataset test = rs::apply_standardizer(te.data, model.standardizer);
  if (a.intercept) {
    inliers = with_bias(inliers);
    test = with_bias(test);
  }
  const rs::PooledDataset pooled = rs::pool(inliers, test);
  const rs::SimilarityGraph graph = rs::build_graph(pooled, a.hp);
  if (!a.graph_out.empty()) {
    std::ofstream out(a.graph_out);
    if (!out) throw rs::Error(rs::ErrorKind::kIo, "cannot write " + a.graph_out);
    rs::write_graph_csv(out, graph);
  }
  const rs::FitResult res = rs::fit(pooled, graph, a.hp);

  model.feature_names = pooled.feature_names;
  model.n_inlier = pooled.n_inlier;
  model.n_test = pooled.n_test;
  model.hp = a.hp;
  model.hp.k_neighbors = graph.k_neighbors;
  model.hp.sigma2 = graph.sigma2;
  model.weights = res.weights;
  model.objective_trace = res.objective_trace;
  model.converged = res.converged;
  model.iterations = res.iterations;
  model.intercept = a.intercept;
  model.features = pooled.features;
  model.sample_ids = pooled.sample_ids;
  model.test_labels = te.labels;
  rs::write_model_json(a.out, model);

  std::cout << "iteration,objective\n";
  for (std::size_t t = 0; t < res.objective_trace.size(); ++t)
    std::cout << t << ',' << rs::format_double(res.objective_trace[t]) << '\n';
  std::cerr << "objective " << rs::format_double(res.objective_trace.back()) << " after "
            << res.iterations << " iterations (" << (res.converged ? "converged" : "not converged")
            << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------- score

struct ScoreArgs {
  std::string model, out;
  std::optional<double> tau;
  int explain_top = 0;
  std::string explain_out;
  std::string subset = "test";
};

int cmd_score(const ScoreArgs& a) {
  const rs::LlrModel model = rs::read_model_json(a.model);
  const rs::PooledDataset pooled = model.pooled();
  const rs::SampleSubset which = a.subset == "all"       ? rs::SampleSubset::kAll
                                 : a.subset == "inliers" ? rs::SampleSubset::kInliers
                                                         : rs::SampleSubset::kTest;
  rs::ScoreSet scores = rs::ratio_score(model.weights, pooled, which);
  if (which == rs::SampleSubset::kInliers) {
    scores.labels = std::vector<rs::Label>(scores.size(), rs::Label::kInlier);
  } else if (model.test_labels) {
    std::vector<rs::Label> labels;
    if (which == rs::SampleSubset::kAll) labels.assign(static_cast<std::size_t>(model.n_inlier), rs::Label::kInlier);
    labels.insert(labels.end(), model.test_labels->begin(), model.test_labels->end());
    scores.labels = std::move(labels);
  }

  std::optional<std::vector<rs::Label>> decisions;
  if (a.tau) decisions = rs::detect(scores, *a.tau);
  rs::write_scores_csv(a.out, scores, decisions ? &*decisions : nullptr);

  if (a.explain_top > 0) {
    std::vector<rs::Explanation> explanations;
    const std::vector<std::string> excluded =
        model.intercept ? std::vector<std::string>{rs::kBiasFeature} : std::vector<std::string>{};
    for (std::size_t k = 0; k < scores.size(); ++k)
      if ((*decisions)[k] == rs::Label::kOutlier)
        explanations.push_back(rs::explain(model.weights, pooled, scores.sample_ids[k], a.explain_top, excluded));
    std::ofstream out(a.explain_out);
    if (!out) throw rs::Error(rs::ErrorKind::kIo, "cannot write " + a.explain_out);
    rs::write_explanations_json(out, explanations);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------- bench

struct BenchArgs {
  rs::BenchConfig config;
  std::string methods = "llr,kde,lof,osvm,l1lr,kliep,ulsif";
  std::string sigma2 = "auto";
  std::string out, table;
  std::string dataset, scores_dir;
  bool no_standardize = false;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (ch != ' ') {
      item += ch;
    }
  }
  return out;
}

int cmd_bench(BenchArgs a) {
  a.config.methods = split_list(a.methods);
  a.config.llr.sigma2 = parse_sigma2(a.sigma2);
  a.config.standardize = !a.no_standardize;
  if (!a.dataset.empty()) a.config.dataset_csv = a.dataset;
  if (!a.scores_dir.empty()) a.config.scores_dir = a.scores_dir;

  const rs::BenchReport report = rs::run_bench(a.config, &std::cerr);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw rs::Error(rs::ErrorKind::kIo, "cannot write " + a.out);
    rs::write_results_json(out, report);
  }
  if (!a.table.empty()) {
    std::ofstream out(a.table);
    if (!out) throw rs::Error(rs::ErrorKind::kIo, "cannot write " + a.table);
    rs::write_results_table(out, report, a.config.paired);
  } else {
    rs::write_results_table(std::cout, report, a.config.paired);
  }
  if (report.failures > 0) {
    std::cerr << report.failures << " method runs failed\n";
    return kExitCompute;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------- eval

struct EvalArgs {
  std::string scores, out;
};

int cmd_eval(const EvalArgs& a) {
  const rs::ScoreSet scores = rs::read_scores_csv(a.scores);
  if (!scores.labels) throw rs::Error(rs::ErrorKind::kParse, a.scores + ": a label column is required");
  const double value = rs::auc(scores);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw rs::Error(rs::ErrorKind::kIo, "cannot write " + a.out);
    out << "fpr,tpr\n";
    for (const auto& p : rs::roc_curve(scores))
      out << rs::format_double(p.fpr) << ',' << rs::format_double(p.tpr) << '\n';
  }
  std::cout << "metric,value\nauc," << rs::format_double(value) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inlier-based outlier detection with localized logistic regression", "ratioscope"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with one object of flag values per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic inlier/test pair");
  c_synth->add_option("--d", synth.spec.d, "Dimension")->capture_default_str();
  c_synth->add_option("--n-inlier", synth.spec.n_inlier, "Inlier samples")->capture_default_str();
  c_synth->add_option("--n-test-inlier", synth.spec.n_test_inlier, "Test inliers")->capture_default_str();
  c_synth->add_option("--n-outlier", synth.spec.n_test_outlier, "Test outliers")->capture_default_str();
  c_synth->add_option("--seed", synth.spec.seed, "Random seed")->capture_default_str();
  c_synth->add_option("--trial", synth.spec.trial, "Trial index within the seed")->capture_default_str();
  c_synth->add_option("--out-dir", synth.out_dir, "Directory for inliers.csv and test.csv")->capture_default_str();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit the LLR model and write it as JSON");
  c_fit->add_option("--inliers", fit.inliers, "Inlier CSV")->required()->check(CLI::ExistingFile);
  c_fit->add_option("--test", fit.test, "Test CSV (optional label column)")->required()->check(CLI::ExistingFile);
  c_fit->add_option("--out", fit.out, "Model JSON path")->required();
  add_llr_options(c_fit, fit.hp, fit.sigma2);
  c_fit->add_flag("--no-standardize", fit.no_standardize, "Use raw features");
  c_fit->add_flag("--intercept", fit.intercept, "Append a constant feature");
  c_fit->add_option("--graph-out", fit.graph_out, "Write the similarity graph as CSV");

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Score samples with a fitted model");
  c_score->add_option("--model", score.model, "Model JSON")->required()->check(CLI::ExistingFile);
  c_score->add_option("--out", score.out, "Scores CSV path")->required();
  auto* tau = c_score->add_option("--tau", score.tau, "Outlier iff score <= tau")->check(CLI::NonNegativeNumber);
  c_score->add_option("--subset", score.subset, "Samples to score")
      ->check(CLI::IsMember({"test", "inliers", "all"}))
      ->capture_default_str();
  auto* top = c_score->add_option("--explain-top", score.explain_top, "Explain flagged outliers by top-k features")
                  ->check(CLI::PositiveNumber)
                  ->needs(tau);
  c_score->add_option("--explain-out", score.explain_out, "Explanations JSON path")->needs(top);
  top->needs(c_score->get_option("--explain-out"));

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Repeated-trial AUC comparison of detectors");
  c_bench->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
  c_bench->add_option("--trials", bench.config.trials, "Trials per dataset")->capture_default_str();
  c_bench->add_option("--dims", bench.config.dims, "Synthetic dimensions")->delimiter(',')->capture_default_str();
  c_bench->add_option("--seed", bench.config.seed, "Random seed")->capture_default_str();
  c_bench->add_option("--threads", bench.config.threads, "Worker threads (0: all cores)")->capture_default_str();
  c_bench->add_option("--n-inlier", bench.config.n_inlier, "Synthetic inlier samples")->capture_default_str();
  c_bench->add_option("--n-test-inlier", bench.config.n_test_inlier, "Synthetic test inliers")->capture_default_str();
  c_bench->add_option("--n-outlier", bench.config.n_test_outlier, "Test outliers per trial")->capture_default_str();
  c_bench->add_option("--dataset", bench.dataset, "Labelled CSV to resplit instead of synthetic data")
      ->check(CLI::ExistingFile);
  c_bench->add_option("--out", bench.out, "Results JSON path");
  c_bench->add_option("--table", bench.table, "Summary CSV path (default stdout)");
  c_bench->add_option("--scores-dir", bench.scores_dir, "Write every score set as CSV here");
  c_bench->add_flag("--paired", bench.config.paired, "Paired instead of Welch t-test");
  c_bench->add_flag("--no-standardize", bench.no_standardize, "Use raw features");
  add_llr_options(c_bench, bench.config.llr, bench.sigma2);
  c_bench->add_option("--osvm-nu", bench.config.osvm_nu, "OSVM nu")->capture_default_str();
  c_bench->add_option("--ulsif-nu", bench.config.ulsif_nu, "uLSIF/RuLSIF ridge")->capture_default_str();
  c_bench->add_option("--rulsif-beta", bench.config.rulsif_beta, "RuLSIF mixture")->capture_default_str();
  c_bench->add_option("--lof-k", bench.config.lof_k, "LOF neighbours")->capture_default_str();
  c_bench->add_option("--l1lr-ratio", bench.config.l1lr_lambda_ratio, "l1-LR lambda / lambda_max")
      ->capture_default_str();
  c_bench->add_option("--max-basis", bench.config.max_basis, "Kernel basis size for KLIEP/uLSIF")
      ->capture_default_str();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "AUC and ROC points of a labelled scores CSV");
  c_eval->add_option("--scores", eval.scores, "Scores CSV with a label column")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval.out, "ROC points CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_fit->parsed()) return cmd_fit(fit);
    if (c_score->parsed()) return cmd_score(score);
    if (c_bench->parsed()) return cmd_bench(bench);
    if (c_eval->parsed()) return cmd_eval(eval);
  } catch (const rs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rs::is_input_error(e.kind()) ? kExitUsage : kExitCompute;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitUsage;
}
