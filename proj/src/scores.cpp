#include "ratioscope/scores.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ratioscope/error.hpp"

namespace ratioscope {

void ScoreSet::validate() const {
  if (sample_ids.size() != scores.size())
    throw Error(ErrorKind::kDimensionMismatch, "sample_ids and scores differ in length");
  if (labels && labels->size() != scores.size())
    throw Error(ErrorKind::kDimensionMismatch, "labels and scores differ in length");
  for (double s : scores)
    if (!(s > 0.0) || !std::isfinite(s))
      throw Error(ErrorKind::kInvalidArgument, "scores must be positive and finite");
}

ScoreSet ratio_score(const WeightMatrix& weights, const PooledDataset& pooled, SampleSubset which) {
  if (weights.rows() != pooled.dim() || weights.cols() != pooled.size())
    throw Error(ErrorKind::kDimensionMismatch, "weights are not aligned with pooled samples");
  Eigen::Index begin = 0, end = pooled.size();
  if (which == SampleSubset::kTest) begin = pooled.n_inlier;
  if (which == SampleSubset::kInliers) end = pooled.n_inlier;

  const double prior = pooled.prior_ratio();
  ScoreSet out;
  for (Eigen::Index i = begin; i < end; ++i) {
    const double exponent =
        std::clamp(weights.col(i).dot(pooled.features.col(i)), -kMaxExponent, kMaxExponent);
    out.sample_ids.push_back(pooled.sample_ids[static_cast<std::size_t>(i)]);
    out.scores.push_back(prior * std::exp(exponent));
  }
  return out;
}

std::vector<Label> detect(const ScoreSet& scores, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::kNegativeThreshold, "tau must be >= 0");
  std::vector<Label> out;
  out.reserve(scores.size());
  for (double s : scores.scores) out.push_back(s <= tau ? Label::kOutlier : Label::kInlier);
  return out;
}

Explanation explain(const WeightMatrix& weights, const PooledDataset& pooled,
                    const std::string& sample_id, int top_k,
                    const std::vector<std::string>& excluded) {
  if (top_k < 1) throw Error(ErrorKind::kInvalidArgument, "top_k must be >= 1");
  // Test samples are searched first so that they win over an inlier with the same id.
  Eigen::Index column = -1;
  for (Eigen::Index i = pooled.n_inlier; i < pooled.size() && column < 0; ++i)
    if (pooled.sample_ids[static_cast<std::size_t>(i)] == sample_id) column = i;
  for (Eigen::Index i = 0; i < pooled.n_inlier && column < 0; ++i)
    if (pooled.sample_ids[static_cast<std::size_t>(i)] == sample_id) column = i;
  if (column < 0) throw Error(ErrorKind::kUnknownSample, "no sample with id '" + sample_id + "'");

  const Eigen::VectorXd w = weights.col(column);
  std::vector<Eigen::Index> order;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const auto& name = pooled.feature_names[static_cast<std::size_t>(k)];
    if (std::find(excluded.begin(), excluded.end(), name) == excluded.end()) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(w[a]) > std::abs(w[b]);
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(top_k)));

  Explanation out;
  out.sample_id = sample_id;
  out.score = pooled.prior_ratio() *
              std::exp(std::clamp(w.dot(pooled.features.col(column)), -kMaxExponent, kMaxExponent));
  for (Eigen::Index k : order)
    out.ranked_features.push_back({pooled.feature_names[static_cast<std::size_t>(k)], w[k]});
  return out;
}

void write_scores_csv(std::ostream& out, const ScoreSet& scores, const std::vector<Label>* decisions) {
  scores.validate();
  if (decisions && decisions->size() != scores.size())
    throw Error(ErrorKind::kDimensionMismatch, "decision count differs from score count");
  out << "sample_id,score";
  if (decisions) out << ",decision";
  if (scores.labels) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << scores.sample_ids[i] << ',' << format_double(scores.scores[i]);
    if (decisions) out << ',' << to_string((*decisions)[i]);
    if (scores.labels) out << ',' << to_string((*scores.labels)[i]);
    out << '\n';
  }
}

void write_scores_csv(const std::string& path, const ScoreSet& scores, const std::vector<Label>* decisions) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  write_scores_csv(out, scores, decisions);
}

ScoreSet parse_scores_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto find = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int id_col = find("sample_id"), score_col = find("score"), label_col = find("label");
  if (id_col < 0 || score_col < 0)
    throw Error(ErrorKind::kParse, source + ": header needs sample_id and score columns");

  ScoreSet out;
  if (label_col >= 0) out.labels.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw Error(ErrorKind::kParse, source + ":" + std::to_string(line_no) + ": wrong cell count");
    const std::string& text = cells[static_cast<std::size_t>(score_col)];
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(ErrorKind::kParse, source + ":" + std::to_string(line_no) + ": bad score '" + text + "'");
    out.sample_ids.push_back(cells[static_cast<std::size_t>(id_col)]);
    out.scores.push_back(value);
    if (label_col >= 0) out.labels->push_back(parse_label(cells[static_cast<std::size_t>(label_col)]));
  }
  out.validate();
  return out;
}

ScoreSet read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  return parse_scores_csv(in, path);
}

void write_explanations_json(std::ostream& out, const std::vector<Explanation>& explanations) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : explanations) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const auto& f : e.ranked_features) features.push_back({{"name", f.name}, {"weight", f.weight}});
    doc.push_back({{"sample_id", e.sample_id}, {"score", e.score}, {"features", features}});
  }
  out << doc.dump(2) << '\n';
}

}  // namespace ratioscope
