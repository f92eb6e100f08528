// Acceptance checks: one PASS/FAIL line per criterion and a failure count.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "ratioscope/baselines.hpp"
#include "ratioscope/bench.hpp"
#include "ratioscope/error.hpp"
#include "ratioscope/eval.hpp"
#include "ratioscope/graph.hpp"
#include "ratioscope/llr.hpp"
#include "ratioscope/scores.hpp"
#include "ratioscope/synth.hpp"
#include "test_util.hpp"

using namespace ratioscope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d: %s  %s (%s; %.1fs)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct Instance {
  PooledDataset pooled;
  LlrHyperparams hp;
  SimilarityGraph graph;
};

// Seeded random LLR problem with d <= 20, n + n' <= 60 and lambdas from {0, 0.1, 1}.
Instance random_instance(std::uint64_t seed) {
  SplitMix64 rng(SplitMix64::mix(seed + 0xacce));
  const int d = 2 + static_cast<int>(rng.next() % 19);
  const int m = 6 + static_cast<int>(rng.next() % 55);
  const int n_in = std::max(3, static_cast<int>(m * (0.4 + 0.3 * rng.uniform())));
  const double grid[] = {0.0, 0.1, 1.0};
  Instance in;
  in.pooled = testutil::random_pooled(d, n_in, m - n_in, seed * 7919 + 3);
  in.hp.lambda1 = grid[rng.next() % 3];
  in.hp.lambda2 = grid[rng.next() % 3];
  in.hp.k_neighbors = std::min(5, m - 1);
  in.graph = build_graph(in.pooled, in.hp);
  return in;
}

// Offset of the surrogate at the anchor, by direct summation over unordered pairs and columns.
double offset_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& r, double l1, double l2, double eps) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double s = std::sqrt((a.col(i) - a.col(j)).squaredNorm() + eps);
      c += l1 * r(i, j) * (s + eps / s);
    }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    double l = 0.0, inv = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      const double u = std::sqrt(a(k, j) * a(k, j) + eps);
      l += u;
      inv += 1.0 / u;
    }
    c += l2 * eps * l * inv;
  }
  return c;
}

double auc_oracle(const std::vector<double>& s, const std::vector<Label>& l) {
  double hits = 0.0, pairs = 0.0;
  for (std::size_t o = 0; o < s.size(); ++o) {
    if (l[o] != Label::kOutlier) continue;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (l[i] != Label::kInlier) continue;
      pairs += 1.0;
      hits += s[o] < s[i] ? 1.0 : (s[o] == s[i] ? 0.5 : 0.0);
    }
  }
  return hits / pairs;
}

// Synthetic trial exactly as the bench harness draws it.
SynthData bench_trial(int dim, std::uint64_t seed, int trial) {
  SynthSpec spec;
  spec.d = dim;
  spec.seed = SplitMix64::mix(seed ^ (static_cast<std::uint64_t>(dim) << 32));
  spec.trial = static_cast<std::uint64_t>(trial);
  SynthData data = generate(spec);
  const StandardizationStats st = fit_standardizer(data.inliers);
  data.inliers = apply_standardizer(data.inliers, st);
  data.test = apply_standardizer(data.test, st);
  return data;
}

const MethodResult& method(const BenchReport& r, const std::string& name) {
  for (const auto& m : r.results.at(0).methods)
    if (m.summary.method == name) return m;
  throw std::runtime_error("method missing from report: " + name);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr std::uint64_t kBenchSeed = 0;

}  // namespace

int main() {
  run(1, "monotone descent over 100 random instances", 120, [] {
    int bad = 0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Instance in = random_instance(s);
      const FitResult f = fit(in.pooled, in.graph, in.hp);
      for (std::size_t t = 1; t < f.objective_trace.size(); ++t) {
        const double rise = f.objective_trace[t] - f.objective_trace[t - 1];
        const double tol = 1e-8 * (1.0 + std::abs(f.objective_trace[t - 1]));
        worst = std::max(worst, rise / tol);
        if (rise > tol) ++bad;
      }
    }
    return Outcome{bad == 0, std::to_string(bad) + " increases; worst rise/tol " + fmt(worst)};
  });

  run(2, "per-iteration decrease bounded by surrogate decrease on 20 instances", 60, [] {
    int bad = 0, steps = 0;
    double worst = -1e300;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Instance in = random_instance(s);
      const auto& hp = in.hp;
      fit(in.pooled, in.graph, hp, [&](const OuterStep& st) {
        const double dj = objective(st.current, in.pooled, in.graph, hp.lambda1, hp.lambda2, hp.epsilon) -
                          objective(st.previous, in.pooled, in.graph, hp.lambda1, hp.lambda2, hp.epsilon);
        const double ds = surrogate(st.current, st.cg, st.ce, in.pooled, hp.lambda1, hp.lambda2) -
                          surrogate(st.previous, st.cg, st.ce, in.pooled, hp.lambda1, hp.lambda2);
        worst = std::max(worst, dj - ds);
        if (dj > ds + 1e-8) ++bad;
        ++steps;
      });
    }
    return Outcome{bad == 0 && steps > 0,
                   std::to_string(bad) + "/" + std::to_string(steps) + " steps violate; max excess " + fmt(worst)};
  });

  run(3, "surrogate gradient matches central differences on 20 instances", 0, [] {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Instance in = random_instance(100 + s);
      in.hp.lambda1 = 0.3;
      in.hp.lambda2 = 0.2;
      const Eigen::Index d = in.pooled.features.rows(), m = in.pooled.size();
      const Eigen::MatrixXd anchor = testutil::random_matrix(d, m, 500 + s);
      const Eigen::MatrixXd w = testutil::random_matrix(d, m, 600 + s);
      const auto cg = majorizer_cg(anchor, in.graph, 1e-6);
      const Eigen::MatrixXd ce = majorizer_ce(anchor, 1e-6);
      const Eigen::MatrixXd g = surrogate_gradient(w, cg, ce, in.pooled, 0.3, 0.2);
      Eigen::MatrixXd fd(d, m);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index j = 0; j < m; ++j) {
          Eigen::MatrixXd wp = w, wm = w;
          wp(k, j) += h;
          wm(k, j) -= h;
          fd(k, j) = (surrogate(wp, cg, ce, in.pooled, 0.3, 0.2) - surrogate(wm, cg, ce, in.pooled, 0.3, 0.2)) / (2 * h);
        }
      worst = std::max(worst, (g - fd).norm() / g.norm());
    }
    return Outcome{worst <= 1e-5, "max relative error " + fmt(worst)};
  });

  run(4, "majorizer touches at the anchor and dominates 100 perturbations", 0, [] {
    const double eps = 1e-12;
    double tangency = 0.0, offset_gap = 0.0, excess = -1e300;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Instance in = random_instance(200 + s);
      in.hp.lambda1 = 0.1 + 0.9 * (s % 2);
      in.hp.lambda2 = 1.0 - 0.9 * (s % 2);
      const double l1 = in.hp.lambda1, l2 = in.hp.lambda2;
      const Eigen::Index d = in.pooled.features.rows(), m = in.pooled.size();
      const Eigen::MatrixXd anchor = testutil::random_matrix(d, m, 700 + s);
      const auto cg = majorizer_cg(anchor, in.graph, eps);
      const Eigen::MatrixXd ce = majorizer_ce(anchor, eps);
      const double c = majorization_offset(anchor, in.graph, l1, l2, eps);
      offset_gap = std::max(offset_gap, std::abs(c - offset_oracle(anchor, Eigen::MatrixXd(in.graph.weights), l1, l2, eps)));
      tangency = std::max(tangency, std::abs(surrogate(anchor, cg, ce, in.pooled, l1, l2) + c -
                                             objective(anchor, in.pooled, in.graph, l1, l2, eps)));
      SplitMix64 rng(900 + s);
      for (int t = 0; t < 100; ++t) {
        const double scale = testutil::uniform(rng, 0.01, 3.0);
        const Eigen::MatrixXd w = anchor + scale * testutil::random_matrix(d, m, 10000 * s + t);
        excess = std::max(excess, objective(w, in.pooled, in.graph, l1, l2, eps) -
                                      (surrogate(w, cg, ce, in.pooled, l1, l2) + c));
      }
    }
    const bool ok = tangency <= 1e-8 && excess <= 1e-8 && offset_gap <= 1e-8;
    return Outcome{ok, "tangency gap " + fmt(tangency) + "; max excess " + fmt(excess) + "; offset vs oracle " +
                           fmt(offset_gap)};
  });

  run(5, "LLR mean AUC at d=10 over 20 trials >= 0.85", 300, [] {
    BenchConfig c;
    c.methods = {"llr"};
    c.dims = {10};
    c.trials = 20;
    c.seed = kBenchSeed;
    const BenchReport r = run_bench(c);
    const auto& m = method(r, "llr");
    const bool ok = r.failures == 0 && m.summary.auc_values.size() == 20 && m.summary.mean >= 0.85;
    return Outcome{ok, "mean AUC " + fmt(m.summary.mean) + " +- " + fmt(m.summary.std)};
  });

  run(6, "LLR beats uLSIF and l1-LR by >= 0.05 mean AUC at d=100 over 20 trials", 900, [] {
    BenchConfig c;
    c.methods = {"llr", "ulsif", "l1lr"};
    c.dims = {100};
    c.trials = 20;
    c.seed = kBenchSeed;
    const BenchReport r = run_bench(c);
    const double llr = method(r, "llr").summary.mean, ulsif = method(r, "ulsif").summary.mean,
                 l1lr = method(r, "l1lr").summary.mean;
    const bool ok = r.failures == 0 && llr - ulsif >= 0.05 && llr - l1lr >= 0.05;
    return Outcome{ok, "llr " + fmt(llr) + ", ulsif " + fmt(ulsif) + ", l1lr " + fmt(l1lr) + ", margins " +
                           fmt(llr - ulsif) + " / " + fmt(llr - l1lr)};
  });

  run(7, "features 1 and 2 carry the largest outlier |w| at d=50 in >= 80% of trials", 900, [] {
    int hits = 0;
    for (int t = 0; t < 20; ++t) {
      const SynthData data = bench_trial(50, kBenchSeed, t);
      const FitResult f = fit(data.inliers, data.test, LlrHyperparams{});
      const Eigen::Index n = data.inliers.size();
      Eigen::VectorXd mean_abs = Eigen::VectorXd::Zero(50);
      int count = 0;
      for (std::size_t i = 0; i < data.test_labels.size(); ++i)
        if (data.test_labels[i] == Label::kOutlier) {
          mean_abs += f.weights.col(n + static_cast<Eigen::Index>(i)).cwiseAbs();
          ++count;
        }
      mean_abs /= count;
      std::vector<int> order(50);
      for (int k = 0; k < 50; ++k) order[static_cast<std::size_t>(k)] = k;
      std::partial_sort(order.begin(), order.begin() + 2, order.end(),
                        [&](int a, int b) { return mean_abs[a] > mean_abs[b]; });
      if (std::min(order[0], order[1]) == 0 && std::max(order[0], order[1]) == 1) ++hits;
    }
    return Outcome{hits >= 16, std::to_string(hits) + "/20 trials"};
  });

  run(8, "default d=10 fits converge within 50 outer iterations in 20 trials", 0, [] {
    int ok = 0, most = 0;
    for (int t = 0; t < 20; ++t) {
      const SynthData data = bench_trial(10, kBenchSeed, t);
      const FitResult f = fit(data.inliers, data.test, LlrHyperparams{});
      if (f.converged && f.iterations <= 50) ++ok;
      most = std::max(most, f.iterations);
    }
    return Outcome{ok == 20, std::to_string(ok) + "/20 converged; most iterations " + std::to_string(most)};
  });

  run(9, "baseline solver oracles", 60, [] {
    std::vector<std::string> bad;
    double ulsif_res = 0.0, kliep_gap = 0.0, l1_res = 0.0, lof_gap = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Dataset in = Dataset::from_matrix(testutil::random_matrix(4, 60, 40 + s), "in");
      Eigen::MatrixXd t = testutil::random_matrix(4, 30, 60 + s);
      t.row(0).array() += 1.0;
      const Dataset te = Dataset::from_matrix(t, "te");
      const double width = median_heuristic(pool(in, te).features);

      for (double beta : {1.0, 0.5}) {
        const KernelModel u = rulsif_fit(in, te, beta, 0.1, width);
        ulsif_res = std::max(ulsif_res, rulsif_residual(u, in, te, beta, 0.1));
      }

      const KernelModel k = kliep_fit(in, te, width);
      const ScoreSet ks = kernel_model_score(k, te, false);
      double mean = 0.0;
      for (double v : ks.scores) mean += v / static_cast<double>(ks.size());
      kliep_gap = std::max(kliep_gap, std::abs(mean - 1.0));
      if (k.alphas.minCoeff() < 0.0) bad.push_back("kliep alpha < 0");

      const KernelModel o = osvm_fit(in, 1.0, width);
      for (Eigen::Index i = 0; i < o.alphas.size(); ++i)
        if (o.alphas[i] != 1.0 / 60.0) bad.push_back("osvm nu=1 alpha not 1/n");

      const PooledDataset p = pool(in, te);
      const LinearModel l = l1lr_fit(p, 0.1 * l1lr_lambda_max(p));
      l1_res = std::max(l1_res, l1lr_optimality_residual(l, p));
    }
    for (int n : {9, 15, 30}) {
      Eigen::MatrixXd g(1, n);
      for (int i = 0; i < n; ++i) g(0, i) = 0.5 * i;
      const Dataset grid = Dataset::from_matrix(g, "g");
      for (int k : {2, 4}) {
        const ScoreSet s = lof_score(grid, grid.select({n / 2}), k);
        lof_gap = std::max(lof_gap, std::abs(1.0 / s.scores[0] - 1.0));
      }
    }
    if (ulsif_res > 1e-8) bad.push_back("ulsif residual");
    if (kliep_gap > 1e-6) bad.push_back("kliep constraint");
    if (l1_res > 1e-5) bad.push_back("l1lr residual");
    if (lof_gap > 0.05) bad.push_back("lof grid");
    std::string detail = "ulsif residual " + fmt(ulsif_res) + ", kliep |mean-1| " + fmt(kliep_gap) +
                         ", l1lr residual " + fmt(l1_res) + ", lof |LOF-1| " + fmt(lof_gap);
    if (!bad.empty()) detail += "; failed: " + bad.front();
    return Outcome{bad.empty(), detail};
  });

  run(10, "rank AUC equals pair counting and ROC area on 200 instances", 0, [] {
    SplitMix64 rng(77);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 2 + rng.next() % 120;
      ScoreSet s;
      std::vector<Label> l(n);
      const double levels = 2.0 + static_cast<double>(rng.next() % 30);
      for (std::size_t i = 0; i < n; ++i) {
        s.sample_ids.push_back("s" + std::to_string(i));
        s.scores.push_back(std::floor(rng.uniform() * levels) / levels);
        l[i] = rng.uniform() < 0.25 ? Label::kOutlier : Label::kInlier;
      }
      l[0] = Label::kOutlier;
      l[n - 1] = Label::kInlier;
      s.labels = l;
      const double want = auc_oracle(s.scores, l);
      worst = std::max({worst, std::abs(auc(s) - want), std::abs(trapezoid_area(roc_curve(s)) - want)});
    }
    return Outcome{worst <= 1e-12, "max deviation " + fmt(worst)};
  });

  run(11, "planted far outlier scores strictly lowest for every method", 0, [] {
    const Eigen::MatrixXd in = 0.3 * testutil::random_matrix(3, 40, 100);
    Eigen::MatrixXd te = 0.3 * testutil::random_matrix(3, 21, 101);
    te.col(20).setConstant(6.0);
    const Dataset inliers = Dataset::from_matrix(in, "in");
    const Dataset test = Dataset::from_matrix(te, "te");
    const PooledDataset pooled = pool(inliers, test);
    const Dataset all(pooled.features, pooled.feature_names, pooled.sample_ids);
    const double width = median_heuristic(pooled.features);

    std::vector<std::pair<std::string, ScoreSet>> runs;
    runs.push_back({"llr", ratio_score(fit(pooled, build_graph(pooled, LlrHyperparams{}), LlrHyperparams{}).weights,
                                       pooled)});
    runs.push_back({"kde", kde_fit_score(inliers, test, median_heuristic(in))});
    runs.push_back({"lof", lof_score(inliers, test, 10)});
    runs.push_back({"osvm", osvm_score(osvm_fit(all, 0.1, width), test)});
    runs.push_back({"l1lr", l1lr_score(l1lr_fit(pooled, 0.1 * l1lr_lambda_max(pooled)), test, 21, 40)});
    runs.push_back({"kliep", kernel_model_score(kliep_fit(inliers, test, width), test, true)});
    runs.push_back({"ulsif", kernel_model_score(rulsif_fit(inliers, test, 1.0, 0.1, width), test, true)});
    std::string wrong;
    for (const auto& [name, s] : runs)
      for (int i = 0; i < 20; ++i)
        if (!(s.scores[20] < s.scores[static_cast<std::size_t>(i)])) {
          wrong += (wrong.empty() ? "" : ",") + name;
          break;
        }
    return Outcome{wrong.empty(), wrong.empty() ? "all 7 methods" : "misoriented: " + wrong};
  });

  run(12, "bench output byte-identical across runs and thread counts", 0, [] {
    const fs::path dir = fs::temp_directory_path() / "ratioscope_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto bench = [&](const std::string& name, int threads) {
      const std::string cmd = "env -u RATIO_SCOPE_THREADS '" + std::string(RATIOSCOPE_CLI) +
                              "' bench --dims 5,10 --trials 4 --seed 11 --threads " + std::to_string(threads) +
                              " --out '" + (dir / name).string() + "' --table '" + (dir / (name + ".csv")).string() +
                              "' 2>/dev/null";
      return std::system(cmd.c_str());
    };
    const int rc = bench("a.json", 1) | bench("b.json", 1) | bench("c.json", 8);
    const std::string a = slurp(dir / "a.json");
    const bool same = !a.empty() && a == slurp(dir / "b.json") && a == slurp(dir / "c.json") &&
                      slurp(dir / "a.json.csv") == slurp(dir / "c.json.csv");
    fs::remove_all(dir);
    return Outcome{rc == 0 && same, rc != 0 ? "bench exited nonzero" : (same ? "3 runs identical" : "outputs differ")};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return 0;
}
