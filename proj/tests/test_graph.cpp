#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ratioscope/error.hpp"
#include "ratioscope/graph.hpp"
#include "test_util.hpp"

using namespace ratioscope;

namespace {

Eigen::MatrixXd line(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index j = 0;
  for (double x : xs) m(0, j++) = x;
  return m;
}

}  // namespace

TEST(MedianHeuristic, SmallCases) {
  EXPECT_DOUBLE_EQ(median_heuristic(line({0, 2})), 2.0);
  EXPECT_DOUBLE_EQ(median_heuristic(line({0, 1, 3})), 2.0);
}

TEST(MedianHeuristic, MatchesBruteForce) {
  const Eigen::MatrixXd x = testutil::random_matrix(5, 50, 11);
  std::vector<double> dist;
  for (int i = 0; i < 50; ++i)
    for (int j = i + 1; j < 50; ++j) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += (x(k, i) - x(k, j)) * (x(k, i) - x(k, j));
      dist.push_back(std::sqrt(s));
    }
  std::sort(dist.begin(), dist.end());
  const std::size_t n = dist.size();
  const double expected = n % 2 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
  EXPECT_DOUBLE_EQ(median_heuristic(x), expected);
}

TEST(MedianHeuristic, Degenerate) {
  try {
    median_heuristic(line({1, 1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateData);
  }
}

TEST(KnnGraph, CoincidentPoints) {
  const SimilarityGraph g = knn_graph(line({4, 4}), 1, 0.3);
  EXPECT_EQ(g.weights.coeff(0, 1), 1.0);
  EXPECT_EQ(g.weights.coeff(1, 0), 1.0);
  EXPECT_EQ(g.weights.coeff(0, 0), 0.0);
}

TEST(KnnGraph, HandEnumeration) {
  const SimilarityGraph g = knn_graph(line({0, 1, 10}), 1, 0.5);
  EXPECT_NEAR(g.weights.coeff(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(g.weights.coeff(1, 2), std::exp(-81.0) / 2.0, 1e-50);
  EXPECT_EQ(g.weights.coeff(0, 2), 0.0);
}

TEST(KnnGraph, TiesGoToSmallerIndex) {
  // Sample 0 sits between 1 and 2 at equal distance; K = 1 picks sample 1.
  const SimilarityGraph g = knn_graph(line({0, -1, 1}), 1, 1.0);
  const double w = std::exp(-0.5);
  EXPECT_NEAR(g.weights.coeff(0, 1), w, 1e-15);      // both directions
  EXPECT_NEAR(g.weights.coeff(0, 2), w / 2.0, 1e-15);  // only 2 -> 0
}

TEST(KnnGraph, StructuralInvariants) {
  const Eigen::MatrixXd x = testutil::random_matrix(3, 40, 12);
  const int k = 4;
  const SimilarityGraph g = knn_graph(x, k, 1.5);
  const Eigen::MatrixXd dense = g.weights;
  EXPECT_TRUE((dense.array() == dense.transpose().array()).all());
  EXPECT_TRUE((dense.diagonal().array() == 0.0).all());
  EXPECT_TRUE((dense.array() >= 0.0).all() && (dense.array() <= 1.0).all());
  for (int i = 0; i < 40; ++i) EXPECT_LE((dense.row(i).array() != 0.0).count(), 2 * k);

  const Eigen::MatrixXd wider = knn_graph(x, k, 3.0).weights;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j)
      if (dense(i, j) != 0.0) {
        EXPECT_GE(wider(i, j), dense(i, j));
      }
}

TEST(KnnGraph, InvalidK) {
  const Eigen::MatrixXd x = testutil::random_matrix(2, 5, 13);
  for (int k : {0, 5, -1}) {
    try {
      knn_graph(x, k, 1.0);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidK);
    }
  }
}

TEST(KnnGraph, CsvDump) {
  std::ostringstream out;
  write_graph_csv(out, knn_graph(line({0, 1, 10}), 1, 0.5));
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "i,j,r_ij");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);  // header + two edges
}
