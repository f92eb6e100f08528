#include "ratioscope/llr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ratioscope/error.hpp"

namespace ratioscope {

void LlrHyperparams::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) fail("lambda1 must be >= 0");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) fail("lambda2 must be >= 0");
  if (k_neighbors < 1) fail("k_neighbors must be >= 1");
  if (sigma2 && (!(*sigma2 > 0.0) || !std::isfinite(*sigma2))) fail("sigma2 must be > 0");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (outer_max_iters < 1 || inner_max_iters < 1) fail("iteration limits must be >= 1");
  if (!(outer_rel_tol > 0.0) || !(inner_grad_tol > 0.0)) fail("tolerances must be > 0");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_shapes(const WeightMatrix& w, const PooledDataset& pooled) {
  if (w.rows() != pooled.dim() || w.cols() != pooled.size())
    throw Error(ErrorKind::kDimensionMismatch,
                "weights are " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                    ", pooled data is " + std::to_string(pooled.dim()) + "x" +
                    std::to_string(pooled.size()));
}

void check_graph(const SimilarityGraph& graph, Eigen::Index m) {
  if (graph.weights.rows() != m || graph.weights.cols() != m)
    throw Error(ErrorKind::kDimensionMismatch, "graph size differs from pooled sample count");
}

Eigen::VectorXd margins(const WeightMatrix& w, const Eigen::MatrixXd& x) {
  return w.cwiseProduct(x).colwise().sum().transpose();
}

double loss_from_margins(const Eigen::VectorXd& margin, const Eigen::VectorXd& y) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) sum += softplus(-y[i] * margin[i]);
  return sum;
}

}  // namespace

double logistic_loss(const WeightMatrix& w, const PooledDataset& pooled) {
  check_shapes(w, pooled);
  return loss_from_margins(margins(w, pooled.features), pooled.labels);
}

double objective(const WeightMatrix& w, const PooledDataset& pooled, const SimilarityGraph& graph,
                 double lambda1, double lambda2, double epsilon) {
  check_shapes(w, pooled);
  check_graph(graph, pooled.size());
  double fused = 0.0;
  if (lambda1 != 0.0) {
    for (Eigen::Index j = 0; j < graph.weights.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, j); it; ++it)
        fused += it.value() * std::sqrt((w.col(it.row()) - w.col(j)).squaredNorm() + epsilon);
  }
  double exclusive = 0.0;
  if (lambda2 != 0.0) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double l1 = (w.col(j).array().square() + epsilon).sqrt().sum();
      exclusive += l1 * l1;
    }
  }
  return logistic_loss(w, pooled) + lambda1 * fused + lambda2 * exclusive;
}

Eigen::SparseMatrix<double> majorizer_cg(const WeightMatrix& w, const SimilarityGraph& graph,
                                         double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "epsilon must be > 0");
  const Eigen::Index m = graph.size();
  if (w.cols() != m) throw Error(ErrorKind::kDimensionMismatch, "weights and graph sizes differ");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(graph.weights.nonZeros() + m));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, j); it; ++it) {
      const Eigen::Index i = it.row();
      if (i == j) continue;
      const double a = it.value() / std::sqrt((w.col(i) - w.col(j)).squaredNorm() + epsilon);
      triplets.emplace_back(i, j, -a);
      diag[j] += a;
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) triplets.emplace_back(i, i, diag[i]);
  Eigen::SparseMatrix<double> cg(m, m);
  cg.setFromTriplets(triplets.begin(), triplets.end());
  cg.makeCompressed();
  return cg;
}

Eigen::MatrixXd majorizer_ce(const WeightMatrix& w, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "epsilon must be > 0");
  const Eigen::ArrayXXd u = (w.array().square() + epsilon).sqrt();
  const Eigen::RowVectorXd l1 = u.colwise().sum().matrix();
  return (u.inverse().rowwise() * l1.array()).matrix();
}

double surrogate(const WeightMatrix& w, const Eigen::SparseMatrix<double>& cg,
                 const Eigen::MatrixXd& ce, const PooledDataset& pooled, double lambda1,
                 double lambda2) {
  check_shapes(w, pooled);
  if (cg.rows() != w.cols() || ce.rows() != w.rows() || ce.cols() != w.cols())
    throw Error(ErrorKind::kDimensionMismatch, "majorizer shapes differ from weights");
  // tr(W Cg W^T) summed edge by edge: the Laplacian form cancels badly when
  // anchor distances approach sqrt(eps).
  double fused = 0.0;
  for (Eigen::Index j = 0; j < cg.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cg, j); it; ++it)
      if (it.row() < j) fused -= it.value() * (w.col(it.row()) - w.col(j)).squaredNorm();
  return logistic_loss(w, pooled) + lambda1 * fused + lambda2 * ce.cwiseProduct(w.cwiseAbs2()).sum();
}

Eigen::MatrixXd surrogate_gradient(const WeightMatrix& w, const Eigen::SparseMatrix<double>& cg,
                                   const Eigen::MatrixXd& ce, const PooledDataset& pooled,
                                   double lambda1, double lambda2) {
  check_shapes(w, pooled);
  const Eigen::VectorXd margin = margins(w, pooled.features);
  Eigen::VectorXd coef(margin.size());
  for (Eigen::Index i = 0; i < margin.size(); ++i) {
    const double y = pooled.labels[i];
    coef[i] = -y * sigmoid(-y * margin[i]);
  }
  Eigen::MatrixXd grad = pooled.features * coef.asDiagonal();
  grad += 2.0 * lambda1 * (w * cg);
  grad += 2.0 * lambda2 * ce.cwiseProduct(w);
  return grad;
}

double majorization_offset(const WeightMatrix& anchor, const SimilarityGraph& graph,
                           double lambda1, double lambda2, double epsilon) {
  double fused = 0.0;
  for (Eigen::Index j = 0; j < graph.weights.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, j); it; ++it) {
      const double s = std::sqrt((anchor.col(it.row()) - anchor.col(j)).squaredNorm() + epsilon);
      fused += 0.5 * it.value() * (s + epsilon / s);
    }
  }
  double exclusive = 0.0;
  for (Eigen::Index j = 0; j < anchor.cols(); ++j) {
    const Eigen::ArrayXd u = (anchor.col(j).array().square() + epsilon).sqrt();
    exclusive += epsilon * u.sum() * u.inverse().sum();
  }
  return lambda1 * fused + lambda2 * exclusive;
}

namespace {

// Restriction of the surrogate to the line W + alpha P. The quadratic part is
// exact in alpha; the logistic part only needs the two margin vectors.
struct LineFunction {
  const Eigen::VectorXd& margin;
  const Eigen::VectorXd& slope;
  const Eigen::VectorXd& y;
  double q1 = 0.0;  // cross term: quad(W + aP) = quad(W) + 2 a q1 + a^2 q2
  double q2 = 0.0;

  double value(double alpha) const {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < margin.size(); ++i)
      sum += softplus(-y[i] * (margin[i] + alpha * slope[i]));
    return sum + 2.0 * alpha * q1 + alpha * alpha * q2;
  }

  void derivatives(double alpha, double& d1, double& d2) const {
    d1 = 2.0 * q1 + 2.0 * alpha * q2;
    d2 = 2.0 * q2;
    for (Eigen::Index i = 0; i < margin.size(); ++i) {
      const double s = sigmoid(-y[i] * (margin[i] + alpha * slope[i]));
      d1 -= y[i] * slope[i] * s;
      d2 += slope[i] * slope[i] * s * (1.0 - s);
    }
  }
};

// Safeguarded Newton iteration for the minimiser of a convex 1-D function
// with negative slope at zero.
double line_minimum(const LineFunction& phi, double slope0) {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double d1 = slope0, d2 = 0.0;
  phi.derivatives(0.0, d1, d2);
  double alpha = d2 > 0.0 ? -d1 / d2 : 1.0;
  for (int it = 0; it < 60; ++it) {
    phi.derivatives(alpha, d1, d2);
    if (std::abs(d1) <= 1e-12 * std::abs(slope0)) break;
    if (d1 < 0.0) lo = alpha; else hi = alpha;
    if (std::isfinite(hi) && hi - lo <= 1e-14 * hi) break;
    double next = d2 > 0.0 ? alpha - d1 / d2 : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * alpha;
    alpha = next;
  }
  return alpha;
}

}  // namespace

InnerResult solve_inner(const PooledDataset& pooled, const Eigen::SparseMatrix<double>& cg,
                        const Eigen::MatrixXd& ce, const LlrHyperparams& hp,
                        const WeightMatrix& w0) {
  check_shapes(w0, pooled);
  if (cg.rows() != w0.cols() || cg.cols() != w0.cols() || ce.rows() != w0.rows() ||
      ce.cols() != w0.cols())
    throw Error(ErrorKind::kDimensionMismatch, "majorizer shapes differ from weights");

  const Eigen::MatrixXd& x = pooled.features;
  const Eigen::VectorXd& y = pooled.labels;
  const double l1 = hp.lambda1;
  const double l2 = hp.lambda2;
  const Eigen::Index m = x.cols();

  WeightMatrix w = w0;
  Eigen::MatrixXd wc = w * cg;
  Eigen::VectorXd margin = margins(w, x);
  Eigen::VectorXd coef(m);

  auto quadratic = [&]() {
    return l1 * wc.cwiseProduct(w).sum() + l2 * ce.cwiseProduct(w.cwiseAbs2()).sum();
  };
  auto gradient = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) coef[i] = -y[i] * sigmoid(-y[i] * margin[i]);
    Eigen::MatrixXd g = x * coef.asDiagonal();
    g += 2.0 * l1 * wc;
    g += 2.0 * l2 * ce.cwiseProduct(w);
    return g;
  };

  // Jacobi preconditioner from the quadratic terms and the logistic curvature at w0.
  Eigen::MatrixXd precond = 2.0 * l2 * ce;
  if (l1 != 0.0) precond.rowwise() += 2.0 * l1 * cg.diagonal().transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = sigmoid(margin[i]);
    precond.col(i) += s * (1.0 - s) * x.col(i).cwiseAbs2();
  }
  const double floor = std::max(1e-12, 1e-12 * precond.maxCoeff());
  const Eigen::MatrixXd inv_precond = precond.cwiseMax(floor).cwiseInverse();

  InnerResult result;
  double value = loss_from_margins(margin, y) + quadratic();
  const double value0 = value;
  Eigen::MatrixXd g = gradient();
  Eigen::MatrixXd z = inv_precond.cwiseProduct(g);
  Eigen::MatrixXd p = -z;
  double gz = g.cwiseProduct(z).sum();
  Eigen::VectorXd slope(m);

  int it = 0;
  for (; it < hp.inner_max_iters; ++it) {
    if (g.norm() <= hp.inner_grad_tol * (1.0 + std::abs(value))) {
      result.converged = true;
      break;
    }
    double dir_slope = g.cwiseProduct(p).sum();
    if (!(dir_slope < 0.0)) {
      p = -z;
      dir_slope = -gz;
    }
    const Eigen::MatrixXd pc = p * cg;
    slope = margins(p, x);
    LineFunction phi{margin, slope, y};
    phi.q1 = l1 * wc.cwiseProduct(p).sum() + l2 * ce.cwiseProduct(w).cwiseProduct(p).sum();
    phi.q2 = l1 * pc.cwiseProduct(p).sum() + l2 * ce.cwiseProduct(p.cwiseAbs2()).sum();

    const double phi0 = phi.value(0.0);
    double alpha = line_minimum(phi, dir_slope);
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      if (alpha > 0.0 && phi.value(alpha) - phi0 <= 1e-4 * alpha * dir_slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Remaining decrease is below rounding of the surrogate value.
      if (std::abs(dir_slope) * std::max(alpha, 1.0) <=
          64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(value)))
        break;
      throw Error(ErrorKind::kLineSearchFailure,
                  "no sufficient decrease along the search direction (ill-conditioned surrogate)");
    }

    w += alpha * p;
    if ((it + 1) % 200 == 0) {
      wc = w * cg;
      margin = margins(w, x);
    } else {
      wc += alpha * pc;
      margin += alpha * slope;
    }
    value = loss_from_margins(margin, y) + quadratic();

    Eigen::MatrixXd g_new = gradient();
    Eigen::MatrixXd z_new = inv_precond.cwiseProduct(g_new);
    const double gz_new = g_new.cwiseProduct(z_new).sum();
    const double beta = std::max(0.0, (gz_new - g_new.cwiseProduct(z).sum()) / gz);
    p = beta * p - z_new;
    g = std::move(g_new);
    z = std::move(z_new);
    gz = gz_new;
  }

  result.iterations = it;
  const double final_value = surrogate(w, cg, ce, pooled, l1, l2);
  const double start_value = it == 0 ? value0 : surrogate(w0, cg, ce, pooled, l1, l2);
  if (it > 0 && final_value > start_value) {
    w = w0;
    result.value = start_value;
    result.grad_norm = surrogate_gradient(w0, cg, ce, pooled, l1, l2).norm();
    result.converged = false;
  } else {
    result.value = it == 0 ? value0 : final_value;
    result.grad_norm = g.norm();
  }
  result.weights = std::move(w);
  return result;
}

SimilarityGraph build_graph(const PooledDataset& pooled, const LlrHyperparams& hp) {
  const Eigen::Index m = pooled.size();
  if (m < 2) throw Error(ErrorKind::kTooFewSamples, "need at least 2 pooled samples");
  const int k = static_cast<int>(std::min<Eigen::Index>(hp.k_neighbors, m - 1));
  double sigma2 = 0.0;
  if (hp.sigma2) {
    sigma2 = *hp.sigma2;
  } else {
    const double sigma = median_heuristic(pooled.features);
    sigma2 = sigma * sigma;
  }
  return knn_graph(pooled.features, k, sigma2);
}

FitResult fit(const PooledDataset& pooled, const SimilarityGraph& graph, const LlrHyperparams& hp,
              const OuterObserver& observer) {
  hp.validate();
  check_graph(graph, pooled.size());
  if (pooled.labels.size() != pooled.size())
    throw Error(ErrorKind::kDimensionMismatch, "label count differs from pooled sample count");

  FitResult result;
  result.graph = graph;
  WeightMatrix w = WeightMatrix::Zero(pooled.dim(), pooled.size());
  double j_prev = objective(w, pooled, graph, hp.lambda1, hp.lambda2, hp.epsilon);
  result.objective_trace.push_back(j_prev);

  for (int t = 0; t < hp.outer_max_iters; ++t) {
    const Eigen::SparseMatrix<double> cg = majorizer_cg(w, graph, hp.epsilon);
    const Eigen::MatrixXd ce = majorizer_ce(w, hp.epsilon);
    InnerResult inner = solve_inner(pooled, cg, ce, hp, w);
    result.inner_iterations += inner.iterations;

    const double j_new = objective(inner.weights, pooled, graph, hp.lambda1, hp.lambda2, hp.epsilon);
    if (j_new > j_prev + 1e-8 * (1.0 + std::abs(j_prev)))
      throw Error(ErrorKind::kNonDecrease, "objective rose from " + format_double(j_prev) +
                                               " to " + format_double(j_new) + " at iteration " +
                                               std::to_string(t + 1));
    result.objective_trace.push_back(j_new);
    result.iterations = t + 1;
    if (observer) observer(OuterStep{t, w, inner.weights, cg, ce, inner});
    w = std::move(inner.weights);

    const double rel_change = std::abs(j_prev - j_new) / std::max(std::abs(j_prev), 1e-300);
    j_prev = j_new;
    if (rel_change < hp.outer_rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.weights = std::move(w);
  return result;
}

FitResult fit(const Dataset& inliers, const Dataset& test, const LlrHyperparams& hp,
              const OuterObserver& observer) {
  hp.validate();
  const PooledDataset pooled = pool(inliers, test);
  return fit(pooled, build_graph(pooled, hp), hp, observer);
}

}  // namespace ratioscope
