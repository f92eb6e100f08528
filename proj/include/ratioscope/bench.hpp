#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ratioscope/eval.hpp"
#include "ratioscope/llr.hpp"

namespace ratioscope {

// Method names accepted by the harness.
const std::vector<std::string>& known_methods();

struct BenchConfig {
  std::vector<std::string> methods{"llr", "kde", "lof", "osvm", "l1lr", "kliep", "ulsif"};
  int trials = 10;
  std::vector<int> dims{10};
  std::uint64_t seed = 0;
  int threads = 1;

  // Synthetic protocol sizes.
  int n_inlier = 200;
  int n_test_inlier = 100;
  int n_test_outlier = 10;

  // CSV resplit protocol: half the inliers model the inlier density, the rest
  // plus up to `n_test_outlier` sampled outliers form the test set.
  std::optional<std::string> dataset_csv;

  bool standardize = true;
  bool paired = false;

  LlrHyperparams llr;
  double osvm_nu = 0.1;
  double ulsif_nu = 0.1;
  double rulsif_beta = 0.5;
  int lof_k = 10;
  double l1lr_lambda_ratio = 0.1;  // lambda = ratio * lambda_max
  int max_basis = 100;

  std::optional<std::string> scores_dir;

  void validate() const;
};

struct MethodResult {
  RunSummary summary;                       // over successful trials
  std::vector<std::optional<double>> aucs;  // per trial; nullopt on failure
};

struct DatasetResult {
  std::string dataset;
  int dim = 0;
  std::vector<MethodResult> methods;
  // p-value of each method pair (in configuration order); nullopt when a side
  // has fewer than two successful trials.
  std::vector<std::pair<std::pair<std::string, std::string>, std::optional<double>>> pairwise_p;
};

struct BenchReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<DatasetResult> results;
  int failures = 0;
};

// Reads RATIO_SCOPE_THREADS and caps `requested` (<= 0 meaning hardware
// concurrency) by it.
int resolve_threads(int requested);

BenchReport run_bench(const BenchConfig& config, std::ostream* log = nullptr);

void write_results_json(std::ostream& out, const BenchReport& report);
// dim,method,mean_auc,std,n_valid,bold
void write_results_table(std::ostream& out, const BenchReport& report, bool paired = false);

}  // namespace ratioscope
