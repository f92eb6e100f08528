#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <functional>
#include <optional>
#include <vector>

#include "ratioscope/dataset.hpp"
#include "ratioscope/graph.hpp"

namespace ratioscope {

// d x (n + n') matrix; column i holds the local coefficient vector of pooled
// sample i.
using WeightMatrix = Eigen::MatrixXd;

struct LlrHyperparams {
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  int k_neighbors = 10;
  std::optional<double> sigma2;  // nullopt: squared median pairwise distance
  double epsilon = 1e-10;
  int outer_max_iters = 100;
  double outer_rel_tol = 1e-6;
  int inner_max_iters = 5000;
  double inner_grad_tol = 1e-7;

  void validate() const;
};

// Overflow-safe log(1 + exp(z)).
double softplus(double z);
// 1 / (1 + exp(-z)) without overflow.
double sigmoid(double z);

// Sum of per-sample logistic losses log(1 + exp(-y_i w_i^T x_i)).
double logistic_loss(const WeightMatrix& w, const PooledDataset& pooled);

// lambda1 * sum_{i,j} r_ij |w_i - w_j| + lambda2 * sum_i |w_i|_1^2 plus the
// logistic loss. Sums run over ordered pairs of all pooled samples. With
// epsilon > 0 every |a| is replaced by sqrt(a^2 + epsilon); epsilon = 0 gives the
// exact nonsmooth objective.
double objective(const WeightMatrix& w, const PooledDataset& pooled, const SimilarityGraph& graph,
                 double lambda1, double lambda2, double epsilon);

// Graph-Laplacian majorizer of the fused term at anchor w:
// off-diagonal -r_ij / s_ij, diagonal sum_j r_ij / s_ij, s_ij = sqrt(|w_i - w_j|^2 + eps).
Eigen::SparseMatrix<double> majorizer_cg(const WeightMatrix& w, const SimilarityGraph& graph,
                                         double epsilon);

// Reweighting of the exclusive term at anchor w:
// Ce(k, j) = sum_k' sqrt(w_k'j^2 + eps) / sqrt(w_kj^2 + eps).
Eigen::MatrixXd majorizer_ce(const WeightMatrix& w, double epsilon);

// Quadratic surrogate: logistic loss + lambda1 tr(W Cg W^T) + lambda2 sum Ce o W o W,
// with Cg a graph Laplacian as built by majorizer_cg.
double surrogate(const WeightMatrix& w, const Eigen::SparseMatrix<double>& cg,
                 const Eigen::MatrixXd& ce, const PooledDataset& pooled, double lambda1,
                 double lambda2);

Eigen::MatrixXd surrogate_gradient(const WeightMatrix& w, const Eigen::SparseMatrix<double>& cg,
                                   const Eigen::MatrixXd& ce, const PooledDataset& pooled,
                                   double lambda1, double lambda2);

// Constant c such that objective(W, eps) <= surrogate(W; anchor) + c for all W,
// with equality at W = anchor.
double majorization_offset(const WeightMatrix& anchor, const SimilarityGraph& graph,
                           double lambda1, double lambda2, double epsilon);

struct InnerResult {
  WeightMatrix weights;
  double value = 0.0;       // surrogate at weights
  double grad_norm = 0.0;   // Frobenius norm of the surrogate gradient
  int iterations = 0;
  bool converged = false;
};

// Minimises the surrogate from w0 by preconditioned Polak-Ribiere+ nonlinear
// conjugate gradients. Never returns a point with a larger surrogate value
// than w0.
InnerResult solve_inner(const PooledDataset& pooled, const Eigen::SparseMatrix<double>& cg,
                        const Eigen::MatrixXd& ce, const LlrHyperparams& hp,
                        const WeightMatrix& w0);

struct FitResult {
  WeightMatrix weights;
  // Smoothed objective per outer iteration, starting with the value at W = 0.
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations = 0;
  int inner_iterations = 0;
  SimilarityGraph graph;
};

// State handed to an observer after every outer iteration.
struct OuterStep {
  int iteration = 0;
  const WeightMatrix& previous;
  const WeightMatrix& current;
  const Eigen::SparseMatrix<double>& cg;
  const Eigen::MatrixXd& ce;
  const InnerResult& inner;
};

using OuterObserver = std::function<void(const OuterStep&)>;

// Majorize-minimize fit of the localized logistic regression model.
FitResult fit(const PooledDataset& pooled, const SimilarityGraph& graph, const LlrHyperparams& hp,
              const OuterObserver& observer = {});

// Pools the samples, builds the kNN graph (K clamped to m - 1, sigma2 from the
// median heuristic unless given) and runs the fit above.
FitResult fit(const Dataset& inliers, const Dataset& test, const LlrHyperparams& hp,
              const OuterObserver& observer = {});

SimilarityGraph build_graph(const PooledDataset& pooled, const LlrHyperparams& hp);

}  // namespace ratioscope
