#include "ratioscope/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "ratioscope/baselines.hpp"
#include "ratioscope/error.hpp"
#include "ratioscope/graph.hpp"
#include "ratioscope/synth.hpp"

namespace ratioscope {

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"llr",   "kde",   "lof",   "osvm",
                                              "l1lr",  "kliep", "ulsif", "rulsif"};
  return names;
}

void BenchConfig::validate() const {
  if (methods.empty()) throw Error(ErrorKind::kInvalidArgument, "no methods selected");
  for (const auto& m : methods) {
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw Error(ErrorKind::kInvalidArgument, "unknown method '" + m + "'");
    if (std::count(methods.begin(), methods.end(), m) > 1)
      throw Error(ErrorKind::kInvalidArgument, "method '" + m + "' listed twice");
  }
  if (trials < 1) throw Error(ErrorKind::kInvalidArgument, "trials must be >= 1");
  if (!dataset_csv) {
    if (dims.empty()) throw Error(ErrorKind::kInvalidArgument, "no dimensions given");
    for (int d : dims)
      if (d < 2) throw Error(ErrorKind::kInvalidSpec, "synthetic dimension must be >= 2");
    if (n_inlier < 2 || n_test_inlier < 1 || n_test_outlier < 1)
      throw Error(ErrorKind::kInvalidSpec, "synthetic sample counts too small");
  }
  llr.validate();
  if (!(osvm_nu > 0.0 && osvm_nu <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "osvm nu must lie in (0, 1]");
  if (!(ulsif_nu >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "ulsif nu must be >= 0");
  if (!(rulsif_beta >= 0.0 && rulsif_beta <= 1.0))
    throw Error(ErrorKind::kInvalidArgument, "rulsif beta must lie in [0, 1]");
  if (lof_k < 1) throw Error(ErrorKind::kInvalidK, "LOF K must be >= 1");
  if (!(l1lr_lambda_ratio >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "l1lr lambda ratio must be >= 0");
  if (max_basis < 1) throw Error(ErrorKind::kInvalidArgument, "max basis must be >= 1");
}

int resolve_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RATIO_SCOPE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(n, 1);
}

namespace {

struct TrialData {
  Dataset inliers;
  Dataset test;
  std::vector<Label> labels;
};

struct Source {
  std::string name;
  int dim = 0;
  std::optional<LabeledDataset> table;  // set for the CSV protocol
};

TrialData synth_trial(const BenchConfig& c, int dim, int trial) {
  SynthSpec spec;
  spec.d = dim;
  spec.n_inlier = c.n_inlier;
  spec.n_test_inlier = c.n_test_inlier;
  spec.n_test_outlier = c.n_test_outlier;
  // Each dimension gets its own stream family so sweeps are independent.
  spec.seed = SplitMix64::mix(c.seed ^ (static_cast<std::uint64_t>(dim) << 32));
  spec.trial = static_cast<std::uint64_t>(trial);
  SynthData data = generate(spec);
  return {std::move(data.inliers), std::move(data.test), std::move(data.test_labels)};
}

TrialData resplit_trial(const BenchConfig& c, const LabeledDataset& table, int trial) {
  std::vector<Eigen::Index> in_idx, out_idx;
  for (std::size_t k = 0; k < table.labels->size(); ++k)
    ((*table.labels)[k] == Label::kInlier ? in_idx : out_idx).push_back(static_cast<Eigen::Index>(k));
  SplitMix64 rng(stream_key(c.seed, StreamRole::kSplit, static_cast<std::uint64_t>(trial)));
  auto shuffle_prefix = [&](std::vector<Eigen::Index>& v, std::size_t count) {
    for (std::size_t i = 0; i < count && i + 1 < v.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next() % (v.size() - i));
      std::swap(v[i], v[j]);
    }
  };
  shuffle_prefix(in_idx, in_idx.size());
  const std::size_t n_model = in_idx.size() / 2;
  const std::size_t n_out = std::min(out_idx.size(), static_cast<std::size_t>(c.n_test_outlier));
  shuffle_prefix(out_idx, n_out);

  std::vector<Eigen::Index> model(in_idx.begin(), in_idx.begin() + static_cast<long>(n_model));
  std::vector<Eigen::Index> test(in_idx.begin() + static_cast<long>(n_model), in_idx.end());
  std::vector<Label> labels(test.size(), Label::kInlier);
  test.insert(test.end(), out_idx.begin(), out_idx.begin() + static_cast<long>(n_out));
  labels.resize(test.size(), Label::kOutlier);
  return {table.data.select(model), table.data.select(test), std::move(labels)};
}

ScoreSet run_method(const std::string& method, const BenchConfig& c, const Dataset& in,
                    const Dataset& te, std::uint64_t basis_seed) {
  if (method == "llr") {
    const PooledDataset pooled = pool(in, te);
    const FitResult res = fit(pooled, build_graph(pooled, c.llr), c.llr);
    return ratio_score(res.weights, pooled);
  }
  if (method == "kde") return kde_fit_score(in, te, median_heuristic(in.features()));
  if (method == "lof") return lof_score(in, te, c.lof_k);
  if (method == "osvm") {
    const PooledDataset pooled = pool(in, te);
    const Dataset all(pooled.features, pooled.feature_names, pooled.sample_ids);
    return osvm_score(osvm_fit(all, c.osvm_nu, median_heuristic(all.features())), te);
  }
  if (method == "l1lr") {
    const PooledDataset pooled = pool(in, te);
    const LinearModel m = l1lr_fit(pooled, c.l1lr_lambda_ratio * l1lr_lambda_max(pooled));
    if (!m.converged) throw Error(ErrorKind::kMaxItersExceeded, "l1-LR did not converge");
    return l1lr_score(m, te, te.size(), in.size());
  }
  const PooledDataset pooled = pool(in, te);
  const double width = median_heuristic(pooled.features);
  if (method == "kliep") {
    KliepOptions o;
    o.max_basis = c.max_basis;
    o.seed = basis_seed;
    return kernel_model_score(kliep_fit(in, te, width, o), te, true);
  }
  RulsifOptions o;
  o.max_basis = c.max_basis;
  o.seed = basis_seed;
  const double beta = method == "ulsif" ? 1.0 : c.rulsif_beta;
  return kernel_model_score(rulsif_fit(in, te, beta, c.ulsif_nu, width, o), te, true);
}

std::string scores_file(const BenchConfig& c, const Source& src, int trial, const std::string& method) {
  return (std::filesystem::path(*c.scores_dir) /
          (src.name + "_d" + std::to_string(src.dim) + "_t" + std::to_string(trial) + "_" + method + ".csv"))
      .string();
}

}  // namespace

BenchReport run_bench(const BenchConfig& c, std::ostream* log) {
  c.validate();
  std::vector<Source> sources;
  if (c.dataset_csv) {
    LabeledDataset table = read_csv(*c.dataset_csv);
    if (!table.labels) throw Error(ErrorKind::kParse, *c.dataset_csv + ": a label column is required");
    const auto n_out = std::count(table.labels->begin(), table.labels->end(), Label::kOutlier);
    const auto n_in = static_cast<long>(table.labels->size()) - n_out;
    if (n_in < 4 || n_out < 1)
      throw Error(ErrorKind::kTooFewSamples, "resplit needs >= 4 inliers and >= 1 outlier");
    if (n_out < c.n_test_outlier && log)
      *log << "warning: only " << n_out << " outliers available, using all of them\n";
    Source s;
    s.name = std::filesystem::path(*c.dataset_csv).stem().string();
    s.dim = static_cast<int>(table.data.dim());
    s.table = std::move(table);
    sources.push_back(std::move(s));
  } else {
    for (int d : c.dims) sources.push_back({"synthetic", d, std::nullopt});
  }
  if (c.scores_dir) std::filesystem::create_directories(*c.scores_dir);

  const std::size_t n_methods = c.methods.size();
  const std::size_t n_trials = static_cast<std::size_t>(c.trials);
  // One slot per (source, trial, method); workers claim whole trials.
  std::vector<std::optional<double>> slots(sources.size() * n_trials * n_methods);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr fatal;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= sources.size() * n_trials) return;
      const Source& src = sources[job / n_trials];
      const int trial = static_cast<int>(job % n_trials);
      try {
        TrialData data = src.table ? resplit_trial(c, *src.table, trial) : synth_trial(c, src.dim, trial);
        if (c.standardize) {
          const StandardizationStats st = fit_standardizer(data.inliers);
          data.inliers = apply_standardizer(data.inliers, st);
          data.test = apply_standardizer(data.test, st);
        }
        const std::uint64_t basis_seed = stream_key(c.seed, StreamRole::kBasis, static_cast<std::uint64_t>(trial));
        for (std::size_t m = 0; m < n_methods; ++m) {
          try {
            ScoreSet s = run_method(c.methods[m], c, data.inliers, data.test, basis_seed);
            s.labels = data.labels;
            slots[job * n_methods + m] = auc(s);
            if (c.scores_dir) write_scores_csv(scores_file(c, src, trial, c.methods[m]), s);
          } catch (const Error& e) {
            if (e.kind() == ErrorKind::kIo) throw;
            std::lock_guard<std::mutex> lock(log_mutex);
            if (log)
              *log << "warning: " << c.methods[m] << " failed on " << src.name << " d=" << src.dim
                   << " trial " << trial << ": " << e.what() << '\n';
          }
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(sources.size() * n_trials);
        return;
      }
    }
  };

  const int n_threads = std::min<int>(resolve_threads(c.threads), static_cast<int>(sources.size() * n_trials));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  BenchReport report;
  report.seed = c.seed;
  report.trials = c.trials;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    DatasetResult dr;
    dr.dataset = sources[s].name;
    dr.dim = sources[s].dim;
    for (std::size_t m = 0; m < n_methods; ++m) {
      MethodResult mr;
      std::vector<double> ok;
      for (std::size_t t = 0; t < n_trials; ++t) {
        const auto& v = slots[(s * n_trials + t) * n_methods + m];
        mr.aucs.push_back(v);
        if (v) ok.push_back(*v);
        else ++report.failures;
      }
      mr.summary = summarize(c.methods[m], ok);
      dr.methods.push_back(std::move(mr));
    }
    for (std::size_t a = 0; a < n_methods; ++a)
      for (std::size_t b = a + 1; b < n_methods; ++b) {
        const auto& va = dr.methods[a].summary.auc_values;
        const auto& vb = dr.methods[b].summary.auc_values;
        std::optional<double> p;
        if (c.paired) {
          // Pair only trials where both methods succeeded.
          std::vector<double> pa, pb;
          for (std::size_t t = 0; t < n_trials; ++t)
            if (dr.methods[a].aucs[t] && dr.methods[b].aucs[t]) {
              pa.push_back(*dr.methods[a].aucs[t]);
              pb.push_back(*dr.methods[b].aucs[t]);
            }
          if (pa.size() >= 2) p = paired_ttest(pa, pb).p_value;
        } else if (va.size() >= 2 && vb.size() >= 2) {
          p = welch_ttest(va, vb).p_value;
        }
        dr.pairwise_p.push_back({{c.methods[a], c.methods[b]}, p});
      }
    report.results.push_back(std::move(dr));
  }
  return report;
}

void write_results_json(std::ostream& out, const BenchReport& report) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["seed"] = report.seed;
  doc["trials"] = report.trials;
  doc["failures"] = report.failures;
  doc["results"] = ordered_json::array();
  for (const auto& dr : report.results) {
    ordered_json entry;
    entry["dataset"] = dr.dataset;
    entry["dim"] = dr.dim;
    entry["methods"] = ordered_json::array();
    for (const auto& mr : dr.methods) {
      ordered_json m;
      m["name"] = mr.summary.method;
      if (mr.summary.auc_values.empty()) {
        m["mean"] = nullptr;
        m["std"] = nullptr;
      } else {
        m["mean"] = mr.summary.mean;
        m["std"] = mr.summary.std;
      }
      ordered_json values = ordered_json::array();
      for (const auto& v : mr.aucs) values.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
      m["auc_values"] = std::move(values);
      entry["methods"].push_back(std::move(m));
    }
    ordered_json pairs = ordered_json::object();
    for (const auto& [names, p] : dr.pairwise_p)
      pairs[names.first + "|" + names.second] = p ? ordered_json(*p) : ordered_json(nullptr);
    entry["pairwise_p"] = std::move(pairs);
    doc["results"].push_back(std::move(entry));
  }
  out << doc.dump(2) << '\n';
}

void write_results_table(std::ostream& out, const BenchReport& report, bool paired) {
  out << "dataset,dim,method,mean_auc,std,n_valid,bold\n";
  for (const auto& dr : report.results) {
    std::vector<RunSummary> runs;
    for (const auto& mr : dr.methods) runs.push_back(mr.summary);
    // Methods with no successful trial cannot be best or comparable.
    std::vector<RunSummary> valid;
    std::vector<std::size_t> index;
    for (std::size_t k = 0; k < runs.size(); ++k)
      if (!runs[k].auc_values.empty()) {
        valid.push_back(runs[k]);
        index.push_back(k);
      }
    std::vector<bool> bold(runs.size(), false);
    const std::vector<bool> vb = comparable_to_best(valid, 0.05, paired);
    for (std::size_t k = 0; k < valid.size(); ++k) bold[index[k]] = vb[k];
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& r = runs[k];
      out << dr.dataset << ',' << dr.dim << ',' << r.method << ',';
      if (r.auc_values.empty()) out << ",,0,0\n";
      else
        out << format_double(r.mean) << ',' << format_double(r.std) << ',' << r.auc_values.size() << ','
            << (bold[k] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace ratioscope
