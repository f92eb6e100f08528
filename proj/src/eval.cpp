#include "ratioscope/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "ratioscope/error.hpp"

namespace ratioscope {

namespace {

const std::vector<Label>& labels_of(const ScoreSet& scores) {
  if (!scores.labels) throw Error(ErrorKind::kInvalidArgument, "scores carry no labels");
  return *scores.labels;
}

void require_both_classes(const std::vector<double>& scores, const std::vector<Label>& labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::kDimensionMismatch, "scores and labels differ in length");
  const auto outliers = std::count(labels.begin(), labels.end(), Label::kOutlier);
  if (outliers == 0 || outliers == static_cast<long>(labels.size()))
    throw Error(ErrorKind::kSingleClass, "AUC needs both inliers and outliers");
}

std::pair<double, double> mean_var(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? ss / (n - 1.0) : 0.0};
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<Label>& labels) {
  require_both_classes(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of inlier midranks (1-based) gives the Mann-Whitney U of inliers over outliers.
  double inlier_rank_sum = 0.0;
  double n_in = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && scores[order[hi + 1]] == scores[order[lo]]) ++hi;
    const double midrank = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k)
      if (labels[order[k]] == Label::kInlier) {
        inlier_rank_sum += midrank;
        n_in += 1.0;
      }
    lo = hi + 1;
  }
  const double n_out = static_cast<double>(n) - n_in;
  const double u = inlier_rank_sum - n_in * (n_in + 1.0) / 2.0;
  return u / (n_in * n_out);
}

double auc(const ScoreSet& scores) { return auc(scores.scores, labels_of(scores)); }

std::vector<RocPoint> roc_curve(const ScoreSet& scores) {
  const auto& labels = labels_of(scores);
  require_both_classes(scores.scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return scores.scores[a] < scores.scores[b]; });
  const double n_out = static_cast<double>(std::count(labels.begin(), labels.end(), Label::kOutlier));
  const double n_in = static_cast<double>(n) - n_out;

  std::vector<RocPoint> curve{{0.0, 0.0}};
  double flagged_in = 0.0, flagged_out = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    (labels[order[k]] == Label::kOutlier ? flagged_out : flagged_in) += 1.0;
    if (k + 1 < n && scores.scores[order[k + 1]] == scores.scores[order[k]]) continue;
    curve.push_back({flagged_in / n_in, flagged_out / n_out});
  }
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    area += (curve[k].fpr - curve[k - 1].fpr) * 0.5 * (curve[k].tpr + curve[k - 1].tpr);
  return area;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorKind::kInvalidArgument, "degrees of freedom must be positive");
  if (t == 0.0) return 1.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorKind::kTooFewSamples, "t-test needs at least two values per group");
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  TTestResult r;
  if (sa + sb == 0.0) {
    r.df = na + nb - 2.0;
    r.p_value = ma == mb ? 1.0 : 0.0;
    r.t = ma == mb ? 0.0 : std::copysign(HUGE_VAL, ma - mb);
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p_value = student_t_two_sided(r.t, r.df);
  return r;
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kDimensionMismatch, "paired samples differ in length");
  if (a.size() < 2) throw Error(ErrorKind::kTooFewSamples, "t-test needs at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const auto [m, v] = mean_var(diff);
  const double n = static_cast<double>(diff.size());
  TTestResult r;
  r.df = n - 1.0;
  if (v == 0.0) {
    r.p_value = m == 0.0 ? 1.0 : 0.0;
    r.t = m == 0.0 ? 0.0 : std::copysign(HUGE_VAL, m);
    return r;
  }
  r.t = m / std::sqrt(v / n);
  r.p_value = student_t_two_sided(r.t, r.df);
  return r;
}

RunSummary summarize(const std::string& method, const std::vector<double>& auc_values) {
  RunSummary s;
  s.method = method;
  s.auc_values = auc_values;
  if (auc_values.empty()) return s;
  const auto [m, v] = mean_var(auc_values);
  s.mean = m;
  s.std = std::sqrt(v);
  s.std_defined = auc_values.size() > 1;
  return s;
}

std::vector<bool> comparable_to_best(const std::vector<RunSummary>& runs, double alpha, bool paired) {
  std::vector<bool> bold(runs.size(), false);
  if (runs.empty()) return bold;
  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k)
    if (runs[k].mean > runs[best].mean) best = k;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (k == best) {
      bold[k] = true;
      continue;
    }
    const auto& a = runs[best].auc_values;
    const auto& b = runs[k].auc_values;
    if (a.size() < 2 || b.size() < 2) continue;
    const double p = paired && a.size() == b.size() ? paired_ttest(a, b).p_value
                                                     : welch_ttest(a, b).p_value;
    bold[k] = p >= alpha;
  }
  return bold;
}

}  // namespace ratioscope
