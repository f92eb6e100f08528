#include "ratioscope/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "ratioscope/error.hpp"
#include "ratioscope/llr.hpp"
#include "ratioscope/synth.hpp"

namespace ratioscope {

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::kKliep: return "kliep";
    case KernelKind::kRulsif: return "rulsif";
    case KernelKind::kOsvm: return "osvm";
    case KernelKind::kKde: return "kde";
  }
  return "unknown";
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d2(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) d2(i, j) = (a.col(i) - b.col(j)).squaredNorm();
  return d2;
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " must be positive and finite");
}

void require_same_dim(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorKind::kDimensionMismatch, "datasets have different feature counts");
}

ScoreSet make_scores(const Dataset& query, std::vector<double> values) {
  ScoreSet out;
  out.sample_ids = query.sample_ids();
  out.scores = std::move(values);
  return out;
}

}  // namespace

Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma2) {
  require_positive(sigma2, "kernel width");
  return (-squared_distances(a, b).array() / (2.0 * sigma2)).exp().matrix();
}

std::vector<Eigen::Index> choose_basis(Eigen::Index m, Eigen::Index limit, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (limit >= m) return idx;
  SplitMix64 rng(stream_key(seed, StreamRole::kBasis, 0));
  for (Eigen::Index i = 0; i < limit; ++i) {
    const auto span = static_cast<std::uint64_t>(m - i);
    const auto j = i + static_cast<Eigen::Index>(rng.next() % span);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------- KDE

ScoreSet kde_fit_score(const Dataset& inliers, const Dataset& query, double sigma) {
  require_positive(sigma, "sigma");
  require_same_dim(inliers, query);
  const double sigma2 = sigma * sigma;
  const double n = static_cast<double>(inliers.size());
  const double log_norm =
      -std::log(n) - 0.5 * static_cast<double>(inliers.dim()) * std::log(2.0 * M_PI * sigma2);
  const Eigen::MatrixXd d2 = squared_distances(inliers.features(), query.features());
  std::vector<double> values;
  for (Eigen::Index q = 0; q < query.size(); ++q) {
    const Eigen::ArrayXd e = -d2.col(q).array() / (2.0 * sigma2);
    const double top = e.maxCoeff();
    const double log_density = log_norm + top + std::log((e - top).exp().sum());
    values.push_back(std::max(std::exp(log_density), std::numeric_limits<double>::min()));
  }
  return make_scores(query, std::move(values));
}

// ---------------------------------------------------------------------------- LOF

namespace {

struct Neighbours {
  std::vector<Eigen::Index> index;
  double mean_distance = 0.0;
};

Neighbours nearest(const Eigen::MatrixXd& reference, const Eigen::VectorXd& x, int k,
                   Eigen::Index exclude) {
  std::vector<std::pair<double, Eigen::Index>> cand;
  cand.reserve(static_cast<std::size_t>(reference.cols()));
  for (Eigen::Index j = 0; j < reference.cols(); ++j)
    if (j != exclude) cand.emplace_back((reference.col(j) - x).norm(), j);
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  Neighbours out;
  double sum = 0.0;
  for (int n = 0; n < k; ++n) {
    out.index.push_back(cand[static_cast<std::size_t>(n)].second);
    sum += cand[static_cast<std::size_t>(n)].first;
  }
  out.mean_distance = std::max(sum / k, 1e-12);
  return out;
}

}  // namespace

ScoreSet lof_score(const Dataset& reference, const Dataset& query, int k) {
  require_same_dim(reference, query);
  if (k < 1 || k >= reference.size())
    throw Error(ErrorKind::kInvalidK, "LOF needs 1 <= K < reference size");
  const Eigen::MatrixXd& ref = reference.features();

  // g(z) = 1 / mean distance to the K nearest reference points.
  Eigen::VectorXd ref_density(ref.cols());
  for (Eigen::Index j = 0; j < ref.cols(); ++j)
    ref_density[j] = 1.0 / nearest(ref, ref.col(j), k, j).mean_distance;

  const auto& ref_ids = reference.sample_ids();
  std::vector<double> values;
  for (Eigen::Index q = 0; q < query.size(); ++q) {
    const auto& id = query.sample_ids()[static_cast<std::size_t>(q)];
    const auto it = std::find(ref_ids.begin(), ref_ids.end(), id);
    const Eigen::Index self = it == ref_ids.end() ? -1 : static_cast<Eigen::Index>(it - ref_ids.begin());
    const Neighbours nb = nearest(ref, query.features().col(q), k, self);
    const double density = 1.0 / nb.mean_distance;
    double lof = 0.0;
    for (Eigen::Index j : nb.index) lof += ref_density[j] / density;
    lof /= k;
    values.push_back(1.0 / lof);
  }
  return make_scores(query, std::move(values));
}

// ---------------------------------------------------------------------------- OSVM

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double cap) {
  const Eigen::Index n = v.size();
  const double total = cap * static_cast<double>(n);
  if (total < 1.0 - 1e-12)
    throw Error(ErrorKind::kInfeasibleNu, "box cap too small for the simplex constraint");
  if (total <= 1.0 + 1e-15) return Eigen::VectorXd::Constant(n, cap);

  auto clipped_sum = [&](double tau) { return (v.array() - tau).max(0.0).min(cap).sum(); };
  double lo = v.minCoeff() - cap;  // every coordinate at the cap
  double hi = v.maxCoeff();        // every coordinate at zero
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (clipped_sum(mid) > 1.0 ? lo : hi) = mid;
  }
  Eigen::VectorXd a = (v.array() - 0.5 * (lo + hi)).max(0.0).min(cap).matrix();
  // Spread the remaining rounding error over free coordinates.
  const double excess = a.sum() - 1.0;
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i)
    if (a[i] > 0.0 && a[i] < cap) free.push_back(i);
  if (!free.empty()) {
    const double share = excess / static_cast<double>(free.size());
    for (Eigen::Index i : free) a[i] = std::clamp(a[i] - share, 0.0, cap);
  }
  return a;
}

KernelModel osvm_fit(const Dataset& samples, double nu, double sigma) {
  if (!(nu > 0.0 && nu <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "nu must lie in (0, 1]");
  require_positive(sigma, "sigma");
  const Eigen::Index n = samples.size();
  const double cap = 1.0 / (static_cast<double>(n) * nu);

  KernelModel model;
  model.kind = KernelKind::kOsvm;
  model.sigma2 = sigma * sigma;
  model.centers = samples.features();
  const Eigen::MatrixXd k = gaussian_kernel(model.centers, model.centers, model.sigma2);

  Eigen::VectorXd alpha = project_capped_simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), cap);
  if (cap * static_cast<double>(n) <= 1.0 + 1e-15 || n == 1) {
    model.alphas = alpha;
    return model;
  }

  const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .maxCoeff();
  const double step = 1.0 / std::max(lipschitz, 1e-12);
  auto value = [&](const Eigen::VectorXd& a) { return 0.5 * a.dot(k * a); };

  Eigen::VectorXd y = alpha;
  double t = 1.0;
  double f = value(alpha);
  int it = 0;
  for (; it < 100000; ++it) {
    Eigen::VectorXd next = project_capped_simplex(y - step * (k * y), cap);
    const double f_next = value(next);
    if (f_next > f && t > 1.0) {  // adaptive restart
      y = alpha;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - alpha);
    alpha = std::move(next);
    f = f_next;
    t = t_next;
    if (it % 10 == 0) {
      const Eigen::VectorXd r = alpha - project_capped_simplex(alpha - k * alpha, cap);
      if (r.cwiseAbs().maxCoeff() <= 1e-8) break;
    }
  }
  model.alphas = alpha;
  model.iterations = it;
  return model;
}

double osvm_kkt_residual(const KernelModel& model, const Dataset& samples, double nu) {
  const double cap = 1.0 / (static_cast<double>(samples.size()) * nu);
  const Eigen::MatrixXd k = gaussian_kernel(model.centers, samples.features(), model.sigma2);
  const Eigen::VectorXd g = k.transpose() * model.alphas;
  return (model.alphas - project_capped_simplex(model.alphas - g, cap)).cwiseAbs().maxCoeff();
}

ScoreSet osvm_score(const KernelModel& model, const Dataset& query) {
  return kernel_model_score(model, query, false);
}

// ---------------------------------------------------------------------------- l1-LR

namespace {

double logistic_sum(const Eigen::VectorXd& w, const PooledDataset& pooled, Eigen::VectorXd* grad) {
  const Eigen::VectorXd margin = pooled.features.transpose() * w;
  double f = 0.0;
  Eigen::VectorXd coef(margin.size());
  for (Eigen::Index i = 0; i < margin.size(); ++i) {
    const double y = pooled.labels[i];
    f += softplus(-y * margin[i]);
    coef[i] = -y * sigmoid(-y * margin[i]);
  }
  if (grad) *grad = pooled.features * coef;
  return f;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double x) { return std::copysign(std::max(std::abs(x) - t, 0.0), x); });
}

double subgradient_residual(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double lambda) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double r = w[k] != 0.0 ? std::abs(g[k] + lambda * (w[k] > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(g[k]) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

double l1lr_lambda_max(const PooledDataset& pooled) {
  Eigen::VectorXd g;
  logistic_sum(Eigen::VectorXd::Zero(pooled.dim()), pooled, &g);
  return g.cwiseAbs().maxCoeff();
}

LinearModel l1lr_fit(const PooledDataset& pooled, double lambda, int max_iters, double tol) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "lambda must be >= 0");
  const Eigen::Index d = pooled.dim();
  LinearModel model;
  model.lambda = lambda;

  // Start from the smooth-part Lipschitz bound / 8 and let backtracking grow it.
  const double spectral = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                              pooled.features * pooled.features.transpose(), Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .maxCoeff();
  double lipschitz = std::max(0.25 * spectral / 8.0, 1e-12);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d), y = w, g;
  auto composite = [&](const Eigen::VectorXd& v) {
    return logistic_sum(v, pooled, nullptr) + lambda * v.lpNorm<1>();
  };
  double f_w = composite(w);
  double t = 1.0;
  int it = 0;
  for (; it < max_iters; ++it) {
    Eigen::VectorXd gw;
    logistic_sum(w, pooled, &gw);
    if (subgradient_residual(w, gw, lambda) <= tol) {
      model.converged = true;
      break;
    }
    const double f_y = logistic_sum(y, pooled, &g);
    Eigen::VectorXd next;
    for (;;) {
      next = soft_threshold(y - g / lipschitz, lambda / lipschitz);
      const Eigen::VectorXd diff = next - y;
      const double bound = f_y + g.dot(diff) + 0.5 * lipschitz * diff.squaredNorm();
      if (logistic_sum(next, pooled, nullptr) <= bound + 1e-12 * std::abs(bound)) break;
      lipschitz *= 2.0;
    }
    const double f_next = composite(next);
    if (f_next > f_w && t > 1.0) {  // restart momentum, keep the monotone iterate
      y = w;
      t = 1.0;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - w);
    w = std::move(next);
    f_w = f_next;
    t = t_next;
  }
  model.w = std::move(w);
  model.iterations = it;
  return model;
}

double l1lr_optimality_residual(const LinearModel& model, const PooledDataset& pooled) {
  Eigen::VectorXd g;
  logistic_sum(model.w, pooled, &g);
  return subgradient_residual(model.w, g, model.lambda);
}

ScoreSet l1lr_score(const LinearModel& model, const Dataset& query, Eigen::Index n_test,
                    Eigen::Index n_inlier) {
  if (model.w.size() != query.dim())
    throw Error(ErrorKind::kDimensionMismatch, "model and query dimensions differ");
  if (n_test < 1 || n_inlier < 1) throw Error(ErrorKind::kInvalidArgument, "sample counts must be >= 1");
  const double prior = static_cast<double>(n_test) / static_cast<double>(n_inlier);
  std::vector<double> values;
  for (Eigen::Index q = 0; q < query.size(); ++q)
    values.push_back(prior * std::exp(std::clamp(model.w.dot(query.features().col(q)),
                                                 -kMaxExponent, kMaxExponent)));
  return make_scores(query, std::move(values));
}

// ---------------------------------------------------------------------------- KLIEP

KernelModel kliep_fit(const Dataset& inliers, const Dataset& test, double tau,
                      const KliepOptions& options) {
  require_positive(tau, "tau");
  require_same_dim(inliers, test);
  KernelModel model;
  model.kind = KernelKind::kKliep;
  model.sigma2 = tau * tau;
  model.centers = inliers.select(choose_basis(inliers.size(), options.max_basis, options.seed)).features();

  // Numerator (inlier) design and denominator (test) kernel means.
  const Eigen::MatrixXd a = gaussian_kernel(inliers.features(), model.centers, model.sigma2);
  const Eigen::VectorXd b =
      gaussian_kernel(test.features(), model.centers, model.sigma2).colwise().mean().transpose();
  const double bb = b.squaredNorm();
  if (!(bb > 0.0)) throw Error(ErrorKind::kAllZeroAlphas, "kernel vanishes on all test samples");

  auto log_likelihood = [&](const Eigen::VectorXd& alpha) {
    const Eigen::ArrayXd r = (a * alpha).array();
    if ((r <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    return r.log().mean();
  };
  auto feasible = [&](Eigen::VectorXd alpha) -> std::optional<Eigen::VectorXd> {
    alpha += ((1.0 - b.dot(alpha)) / bb) * b;
    alpha = alpha.cwiseMax(0.0);
    const double scale = b.dot(alpha);
    if (!(scale > 0.0)) return std::nullopt;
    return alpha / scale;
  };

  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(model.centers.cols());
  alpha /= b.dot(alpha);
  double obj = log_likelihood(alpha);
  model.objective_trace.push_back(obj);
  double step = -1.0;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    const Eigen::VectorXd grad = a.transpose() * (a * alpha).cwiseInverse() / static_cast<double>(a.rows());
    if (step < 0.0) step = 0.1 * alpha.norm() / std::max(grad.norm(), 1e-300);
    bool accepted = false;
    while (step > 1e-14 * alpha.norm() / std::max(grad.norm(), 1e-300)) {
      const auto candidate = feasible(alpha + step * grad);
      if (candidate) {
        const double cand_obj = log_likelihood(*candidate);
        if (cand_obj >= obj) {
          const double gain = cand_obj - obj;
          alpha = *candidate;
          obj = cand_obj;
          model.objective_trace.push_back(obj);
          step *= 1.5;
          accepted = true;
          if (gain <= options.tol * (1.0 + std::abs(obj))) it = options.max_iters;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(alpha.maxCoeff() > 0.0)) throw Error(ErrorKind::kAllZeroAlphas, "all KLIEP coefficients vanished");
  model.alphas = alpha / b.dot(alpha);
  model.iterations = std::min(it, options.max_iters);
  return model;
}

// ---------------------------------------------------------------------------- (R)uLSIF

namespace {

struct RulsifSystem {
  Eigen::MatrixXd h_mat;
  Eigen::VectorXd h_vec;
};

RulsifSystem rulsif_system(const Eigen::MatrixXd& centers, double sigma2, const Dataset& inliers,
                           const Dataset& test, double beta) {
  const Eigen::MatrixXd k_in = gaussian_kernel(inliers.features(), centers, sigma2);
  const Eigen::MatrixXd k_te = gaussian_kernel(test.features(), centers, sigma2);
  RulsifSystem sys;
  sys.h_mat = ((1.0 - beta) / static_cast<double>(inliers.size())) * (k_in.transpose() * k_in) +
              (beta / static_cast<double>(test.size())) * (k_te.transpose() * k_te);
  sys.h_vec = k_in.colwise().mean().transpose();
  return sys;
}

}  // namespace

KernelModel rulsif_fit(const Dataset& inliers, const Dataset& test, double beta, double nu,
                       double sigma, const RulsifOptions& options) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "beta must lie in [0, 1]");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw Error(ErrorKind::kInvalidArgument, "nu must be >= 0");
  require_positive(sigma, "sigma");
  require_same_dim(inliers, test);

  KernelModel model;
  model.kind = KernelKind::kRulsif;
  model.sigma2 = sigma * sigma;
  model.centers = inliers.select(choose_basis(inliers.size(), options.max_basis, options.seed)).features();
  const RulsifSystem sys = rulsif_system(model.centers, model.sigma2, inliers, test, beta);

  Eigen::MatrixXd system = sys.h_mat;
  system.diagonal().array() += nu;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15)
    throw Error(ErrorKind::kSingularSystem, "(H + nu I) is singular; increase nu");
  Eigen::VectorXd alpha = ldlt.solve(sys.h_vec);
  const double target = 1e-8 * sys.h_vec.norm();
  for (int refine = 0; refine < 3; ++refine) {
    const Eigen::VectorXd residual = sys.h_vec - system * alpha;
    if (residual.norm() <= target) break;
    alpha += ldlt.solve(residual);
  }
  if ((system * alpha - sys.h_vec).norm() > target)
    throw Error(ErrorKind::kSingularSystem, "linear solve did not reach the residual target");
  model.alphas = std::move(alpha);
  return model;
}

double rulsif_residual(const KernelModel& model, const Dataset& inliers, const Dataset& test,
                       double beta, double nu) {
  const RulsifSystem sys = rulsif_system(model.centers, model.sigma2, inliers, test, beta);
  Eigen::MatrixXd system = sys.h_mat;
  system.diagonal().array() += nu;
  return (system * model.alphas - sys.h_vec).norm() / sys.h_vec.norm();
}

ScoreSet kernel_model_score(const KernelModel& model, const Dataset& query, bool clamp_nonneg) {
  if (model.centers.rows() != query.dim())
    throw Error(ErrorKind::kDimensionMismatch, "model and query dimensions differ");
  const Eigen::VectorXd raw =
      gaussian_kernel(query.features(), model.centers, model.sigma2) * model.alphas;
  const double floor = clamp_nonneg ? kRatioFloor : std::numeric_limits<double>::min();
  std::vector<double> values(static_cast<std::size_t>(raw.size()));
  for (Eigen::Index q = 0; q < raw.size(); ++q) values[static_cast<std::size_t>(q)] = std::max(raw[q], floor);
  return make_scores(query, std::move(values));
}

}  // namespace ratioscope
