#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ratioscope/dataset.hpp"
#include "ratioscope/llr.hpp"

namespace ratioscope {

// Ratio-style scores: higher means more inlier-like. Scores are strictly
// positive and finite.
struct ScoreSet {
  std::vector<std::string> sample_ids;
  std::vector<double> scores;
  std::optional<std::vector<Label>> labels;

  std::size_t size() const { return scores.size(); }
  void validate() const;
};

enum class SampleSubset { kTest, kInliers, kAll };

inline constexpr double kMaxExponent = 500.0;

// (n / n') exp(w_i^T x_i) for the selected pooled samples; the exponent is
// clamped to +-500.
ScoreSet ratio_score(const WeightMatrix& weights, const PooledDataset& pooled,
                     SampleSubset which = SampleSubset::kTest);

// Outlier iff score <= tau.
std::vector<Label> detect(const ScoreSet& scores, double tau);

struct FeatureWeight {
  std::string name;
  double weight = 0.0;
};

struct Explanation {
  std::string sample_id;
  double score = 0.0;
  std::vector<FeatureWeight> ranked_features;  // by |weight| desc, ties by index
};

// Top-k features of one sample's coefficient column. Features listed in
// `excluded` (e.g. an added bias column) are never reported.
Explanation explain(const WeightMatrix& weights, const PooledDataset& pooled,
                    const std::string& sample_id, int top_k,
                    const std::vector<std::string>& excluded = {});

// sample_id,score[,decision][,label]
void write_scores_csv(std::ostream& out, const ScoreSet& scores,
                      const std::vector<Label>* decisions = nullptr);
void write_scores_csv(const std::string& path, const ScoreSet& scores,
                      const std::vector<Label>* decisions = nullptr);
ScoreSet read_scores_csv(const std::string& path);
ScoreSet parse_scores_csv(std::istream& in, const std::string& source = "<stream>");

void write_explanations_json(std::ostream& out, const std::vector<Explanation>& explanations);

}  // namespace ratioscope
