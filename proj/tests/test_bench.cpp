#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ratioscope/bench.hpp"
#include "ratioscope/error.hpp"
#include "ratioscope/model_io.hpp"
#include "ratioscope/scores.hpp"
#include "test_util.hpp"

using namespace ratioscope;
namespace fs = std::filesystem;

namespace {

BenchConfig small_config() {
  BenchConfig c;
  c.methods = {"llr", "kde", "lof", "osvm", "l1lr", "kliep", "ulsif", "rulsif"};
  c.trials = 3;
  c.dims = {3, 5};
  c.seed = 17;
  c.n_inlier = 40;
  c.n_test_inlier = 20;
  c.n_test_outlier = 5;
  return c;
}

std::string json_of(const BenchReport& r) {
  std::ostringstream out;
  write_results_json(out, r);
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ratioscope_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Bench, SmallSyntheticRun) {
  const BenchReport r = run_bench(small_config());
  EXPECT_EQ(r.failures, 0);
  ASSERT_EQ(r.results.size(), 2u);
  for (const auto& d : r.results) {
    ASSERT_EQ(d.methods.size(), 8u);
    for (const auto& m : d.methods) {
      ASSERT_EQ(m.aucs.size(), 3u);
      for (const auto& a : m.aucs) {
        ASSERT_TRUE(a.has_value()) << m.summary.method;
        EXPECT_GE(*a, 0.0);
        EXPECT_LE(*a, 1.0);
      }
    }
    EXPECT_EQ(d.pairwise_p.size(), 28u);
  }
}

TEST(Bench, ReproducibleAndThreadInvariant) {
  BenchConfig c = small_config();
  c.methods = {"llr", "kliep", "lof"};
  const std::string one = json_of(run_bench(c));
  EXPECT_EQ(one, json_of(run_bench(c)));
  c.threads = 4;
  EXPECT_EQ(one, json_of(run_bench(c)));
}

TEST(Bench, FailedMethodBecomesNull) {
  BenchConfig c = small_config();
  c.methods = {"lof", "kde"};
  c.dims = {3};
  c.lof_k = 500;
  std::ostringstream log;
  const BenchReport r = run_bench(c, &log);
  EXPECT_EQ(r.failures, 3);
  for (const auto& a : r.results[0].methods[0].aucs) EXPECT_FALSE(a.has_value());
  for (const auto& a : r.results[0].methods[1].aucs) EXPECT_TRUE(a.has_value());
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  const auto j = nlohmann::json::parse(json_of(r));
  EXPECT_TRUE(j["results"][0]["methods"][0]["mean"].is_null());
  EXPECT_TRUE(j["results"][0]["methods"][0]["auc_values"][0].is_null());
}

TEST(Bench, ConfigValidation) {
  BenchConfig c = small_config();
  c.methods = {"nope"};
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.trials = 0;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.dims = {1};
  EXPECT_THROW(c.validate(), Error);
}

TEST(Bench, JsonLayout) {
  BenchConfig c = small_config();
  c.methods = {"kde", "lof"};
  c.dims = {4};
  const auto j = nlohmann::json::parse(json_of(run_bench(c)));
  EXPECT_EQ(j["seed"], 17);
  EXPECT_EQ(j["trials"], 3);
  EXPECT_EQ(j["failures"], 0);
  ASSERT_EQ(j["results"].size(), 1u);
  const auto& d = j["results"][0];
  EXPECT_EQ(d["dataset"], "synthetic");
  EXPECT_EQ(d["dim"], 4);
  EXPECT_EQ(d["methods"][0]["name"], "kde");
  EXPECT_EQ(d["methods"][1]["name"], "lof");
  EXPECT_EQ(d["methods"][0]["auc_values"].size(), 3u);
  EXPECT_TRUE(d["pairwise_p"].contains("kde|lof"));

  std::ostringstream table;
  write_results_table(table, run_bench(c));
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "dataset,dim,method,mean_auc,std,n_valid,bold");
}

TEST(Bench, ResplitSizesAndScoreFiles) {
  const fs::path dir = scratch("resplit");
  BenchConfig c;
  c.methods = {"llr", "kde", "ulsif"};
  c.trials = 2;
  c.dataset_csv = std::string(RATIOSCOPE_DATA_DIR) + "/blobs.csv";
  c.scores_dir = dir.string();
  const BenchReport r = run_bench(c);
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].dataset, "blobs");
  EXPECT_EQ(r.results[0].dim, 4);
  for (std::size_t m = 0; m < 3; ++m) {
    for (int t = 0; t < 2; ++t) {
      const ScoreSet s = read_scores_csv(
          (dir / ("blobs_d4_t" + std::to_string(t) + "_" + c.methods[m] + ".csv")).string());
      // 60 inliers: 30 model the density, 30 join 10 sampled outliers in the test set.
      ASSERT_EQ(s.size(), 40u);
      ASSERT_TRUE(s.labels);
      EXPECT_EQ(std::count(s.labels->begin(), s.labels->end(), Label::kOutlier), 10);
      EXPECT_EQ(auc(s), *r.results[0].methods[m].aucs[static_cast<std::size_t>(t)]);
    }
  }
  fs::remove_all(dir);
}

TEST(Bench, ResplitNeedsLabels) {
  const fs::path dir = scratch("nolabel");
  fs::create_directories(dir);
  const std::string path = (dir / "x.csv").string();
  {
    std::ofstream out(path);
    out << "sample_id,a,b\n";
    for (int i = 0; i < 10; ++i) out << "s" << i << "," << i << "," << i * i << "\n";
  }
  BenchConfig c;
  c.dataset_csv = path;
  EXPECT_THROW(run_bench(c), Error);
  fs::remove_all(dir);
}

TEST(Bench, ThreadEnvironmentCap) {
  ::setenv("RATIO_SCOPE_THREADS", "2", 1);
  EXPECT_EQ(resolve_threads(8), 2);
  EXPECT_EQ(resolve_threads(1), 1);
  ::unsetenv("RATIO_SCOPE_THREADS");
  EXPECT_EQ(resolve_threads(3), 3);
  EXPECT_GE(resolve_threads(0), 1);
}

TEST(ModelIo, RoundTrip) {
  const PooledDataset p = testutil::random_pooled(3, 12, 6, 5);
  LlrHyperparams hp;
  hp.k_neighbors = 4;
  const Dataset in(p.features.leftCols(12), p.feature_names,
                   std::vector<std::string>(p.sample_ids.begin(), p.sample_ids.begin() + 12));
  const Dataset te(p.features.rightCols(6), p.feature_names,
                   std::vector<std::string>(p.sample_ids.begin() + 12, p.sample_ids.end()));
  const FitResult f = fit(in, te, hp);

  LlrModel m;
  m.feature_names = p.feature_names;
  m.n_inlier = 12;
  m.n_test = 6;
  m.hp = hp;
  m.hp.sigma2 = f.graph.sigma2;
  m.weights = f.weights;
  m.objective_trace = f.objective_trace;
  m.converged = f.converged;
  m.iterations = f.iterations;
  m.standardizer = StandardizationStats::identity(3);
  m.features = p.features;
  m.sample_ids = p.sample_ids;
  m.test_labels = std::vector<Label>(6, Label::kInlier);
  (*m.test_labels)[0] = Label::kOutlier;

  std::stringstream buf;
  write_model_json(buf, m);
  const LlrModel back = read_model_json(buf);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.objective_trace, m.objective_trace);
  EXPECT_EQ(back.sample_ids, m.sample_ids);
  EXPECT_EQ(back.feature_names, m.feature_names);
  EXPECT_EQ(*back.hp.sigma2, *m.hp.sigma2);
  EXPECT_EQ(back.hp.k_neighbors, 4);
  EXPECT_EQ(back.converged, m.converged);
  EXPECT_EQ(back.test_labels, m.test_labels);
  EXPECT_EQ(back.standardizer.mean, m.standardizer.mean);

  const ScoreSet a = ratio_score(m.weights, m.pooled());
  const ScoreSet b = ratio_score(back.weights, back.pooled());
  EXPECT_EQ(a.scores, b.scores);
}

TEST(ModelIo, ParseErrors) {
  auto kind = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_model_json(in);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;
  };
  EXPECT_EQ(kind("{"), ErrorKind::kParse);
  EXPECT_EQ(kind("{}"), ErrorKind::kParse);
  EXPECT_EQ(kind("[1,2]"), ErrorKind::kParse);
}
