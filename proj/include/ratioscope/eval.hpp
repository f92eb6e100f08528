#pragma once

#include <string>
#include <vector>

#include "ratioscope/scores.hpp"

namespace ratioscope {

// AUC with outliers expected to score low: P(outlier < inlier) + P(tie) / 2,
// computed from midranks.
double auc(const ScoreSet& scores);
double auc(const std::vector<double>& scores, const std::vector<Label>& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Sweeps tau over the distinct scores (outlier iff score <= tau); tpr is the
// fraction of outliers flagged, fpr the fraction of inliers flagged.
std::vector<RocPoint> roc_curve(const ScoreSet& scores);
double trapezoid_area(const std::vector<RocPoint>& curve);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Two-sided Welch test, or the paired test on a - b when paired is set.
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b);
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided tail probability 2 P(T > |t|) for Student t with df degrees of freedom.
double student_t_two_sided(double t, double df);

struct RunSummary {
  std::string method;
  std::vector<double> auc_values;
  double mean = 0.0;
  double std = 0.0;          // m - 1 denominator
  bool std_defined = false;  // false when fewer than two values
};

RunSummary summarize(const std::string& method, const std::vector<double>& auc_values);

// Marks the best mean plus every method whose test against it gives p >= alpha.
std::vector<bool> comparable_to_best(const std::vector<RunSummary>& runs, double alpha = 0.05,
                                     bool paired = false);

}  // namespace ratioscope
