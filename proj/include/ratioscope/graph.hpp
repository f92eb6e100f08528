#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <ostream>
#include <string>

namespace ratioscope {

// Symmetric kNN Gaussian similarity graph over pooled samples. Diagonal is
// zero, entries lie in [0, 1], each row has at most 2K nonzeros.
struct SimilarityGraph {
  Eigen::SparseMatrix<double> weights;
  int k_neighbors = 0;
  double sigma2 = 0.0;

  Eigen::Index size() const { return weights.rows(); }
};

// Median of all pairwise Euclidean distances between columns.
double median_heuristic(const Eigen::MatrixXd& data);

// Directed weights exp(-|xi - xj|^2 / (2 sigma2)) to the K nearest neighbours
// of each column (ties to the smaller index), then r = (w + w^T) / 2.
SimilarityGraph knn_graph(const Eigen::MatrixXd& data, int k, double sigma2);

// Upper-triangle (i, j, r_ij) triples.
void write_graph_csv(std::ostream& out, const SimilarityGraph& graph);

}  // namespace ratioscope
