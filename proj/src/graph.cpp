#include "ratioscope/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "ratioscope/dataset.hpp"
#include "ratioscope/error.hpp"

namespace ratioscope {

double median_heuristic(const Eigen::MatrixXd& data) {
  const Eigen::Index m = data.cols();
  if (m < 2) throw Error(ErrorKind::kTooFewSamples, "median heuristic needs at least 2 samples");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) dist.push_back((data.col(i) - data.col(j)).norm());

  const std::size_t half = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half), dist.end());
  double median = dist[half];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) throw Error(ErrorKind::kDegenerateData, "median pairwise distance is zero");
  return median;
}

SimilarityGraph knn_graph(const Eigen::MatrixXd& data, int k, double sigma2) {
  const Eigen::Index m = data.cols();
  if (k <= 0 || k >= m)
    throw Error(ErrorKind::kInvalidK, "K=" + std::to_string(k) + " must lie in [1, " +
                                          std::to_string(m - 1) + "]");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw Error(ErrorKind::kInvalidArgument, "sigma2 must be positive and finite");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * k * m));
  std::vector<std::pair<double, Eigen::Index>> candidates(static_cast<std::size_t>(m - 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      candidates[c++] = {(data.col(i) - data.col(j)).squaredNorm(), j};
    }
    // Pairs compare by distance then index, giving the documented tie-break.
    std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());
    for (int n = 0; n < k; ++n) {
      const auto [d2, j] = candidates[static_cast<std::size_t>(n)];
      const double w = 0.5 * std::exp(-d2 / (2.0 * sigma2));
      triplets.emplace_back(i, j, w);
      triplets.emplace_back(j, i, w);
    }
  }
  SimilarityGraph graph;
  graph.weights.resize(m, m);
  graph.weights.setFromTriplets(triplets.begin(), triplets.end());
  graph.weights.prune(0.0);
  graph.weights.makeCompressed();
  graph.k_neighbors = k;
  graph.sigma2 = sigma2;
  return graph;
}

void write_graph_csv(std::ostream& out, const SimilarityGraph& graph) {
  out << "i,j,r_ij\n";
  for (Eigen::Index col = 0; col < graph.weights.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, col); it; ++it)
      if (it.row() < it.col())
        out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
}

}  // namespace ratioscope
