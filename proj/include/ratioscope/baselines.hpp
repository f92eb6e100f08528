#pragma once

#include <cstdint>
#include <vector>

#include "ratioscope/dataset.hpp"
#include "ratioscope/scores.hpp"

namespace ratioscope {

// Gaussian kernel matrix exp(-|a_i - b_j|^2 / (2 sigma2)), a.cols() x b.cols().
Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma2);

enum class KernelKind { kKliep, kRulsif, kOsvm, kKde };

const char* to_string(KernelKind kind);

// score(x) = sum_l alphas_l exp(-|x - center_l|^2 / (2 sigma2)).
struct KernelModel {
  Eigen::MatrixXd centers;
  Eigen::VectorXd alphas;
  double sigma2 = 1.0;
  KernelKind kind = KernelKind::kKde;
  int iterations = 0;
  // Accepted-step objective values (KLIEP only).
  std::vector<double> objective_trace;
};

struct LinearModel {
  Eigen::VectorXd w;
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Seeded choice of min(limit, m) sample columns, returned in increasing order.
std::vector<Eigen::Index> choose_basis(Eigen::Index m, Eigen::Index limit, std::uint64_t seed);

// --- unsupervised detectors -------------------------------------------------

ScoreSet kde_fit_score(const Dataset& inliers, const Dataset& query, double sigma);

// Inverted simplified LOF: the reported score is 1 / LOF_K. A query whose id
// matches a reference id is treated as that reference point (self excluded).
ScoreSet lof_score(const Dataset& reference, const Dataset& query, int k);

// One-class SVM dual over the capped simplex {sum a = 1, 0 <= a <= 1/(n nu)},
// solved by accelerated projected gradient.
KernelModel osvm_fit(const Dataset& samples, double nu, double sigma);
ScoreSet osvm_score(const KernelModel& model, const Dataset& query);

// Exact Euclidean projection onto {sum a = 1, 0 <= a <= cap}.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double cap);

// Projected-gradient fixed-point residual |a - P(a - K a)|_inf of the OSVM dual.
double osvm_kkt_residual(const KernelModel& model, const Dataset& samples, double nu);

// --- inlier-based ratio estimators --------------------------------------------

// l1-regularised logistic regression on the pooled data by proximal gradient.
LinearModel l1lr_fit(const PooledDataset& pooled, double lambda, int max_iters = 20000,
                     double tol = 1e-7);
// Largest |d/dw_k| of the logistic loss at w = 0; any lambda above it gives w = 0.
double l1lr_lambda_max(const PooledDataset& pooled);
// Max violation of the l1 subgradient optimality conditions.
double l1lr_optimality_residual(const LinearModel& model, const PooledDataset& pooled);
ScoreSet l1lr_score(const LinearModel& model, const Dataset& query, Eigen::Index n_test,
                    Eigen::Index n_inlier);

struct KliepOptions {
  int max_iters = 2000;
  double tol = 1e-8;
  Eigen::Index max_basis = 100;
  std::uint64_t seed = 0;
};

// Estimates r = p'(inlier) / p(test): maximises the mean log-ratio over
// inliers subject to mean ratio over test samples equal to 1 and alpha >= 0.
KernelModel kliep_fit(const Dataset& inliers, const Dataset& test, double tau,
                      const KliepOptions& options = {});

struct RulsifOptions {
  Eigen::Index max_basis = 100;
  std::uint64_t seed = 0;
};

// Relative ratio p' / ((1 - beta) p' + beta p) by regularised least squares;
// beta = 1 is plain uLSIF.
KernelModel rulsif_fit(const Dataset& inliers, const Dataset& test, double beta, double nu,
                       double sigma, const RulsifOptions& options = {});

// Relative residual |(H + nu I) alpha - h| / |h| of a fitted (R)uLSIF model.
double rulsif_residual(const KernelModel& model, const Dataset& inliers, const Dataset& test,
                       double beta, double nu);

inline constexpr double kRatioFloor = 1e-12;

// Kernel expansion at each query. With clamp_nonneg the score is floored at
// 1e-12; otherwise nonpositive values (underflow) are floored at the smallest
// normal double.
ScoreSet kernel_model_score(const KernelModel& model, const Dataset& query, bool clamp_nonneg);

}  // namespace ratioscope
