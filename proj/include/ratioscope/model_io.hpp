#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ratioscope/dataset.hpp"
#include "ratioscope/llr.hpp"

namespace ratioscope {

// A fitted LLR model together with the (standardized) pooled samples it was
// fitted on, so scores and explanations can be produced from the file alone.
struct LlrModel {
  std::vector<std::string> feature_names;
  Eigen::Index n_inlier = 0;
  Eigen::Index n_test = 0;
  LlrHyperparams hp;  // sigma2 always resolved
  WeightMatrix weights;
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations = 0;
  StandardizationStats standardizer;
  bool intercept = false;
  Eigen::MatrixXd features;
  std::vector<std::string> sample_ids;
  std::optional<std::vector<Label>> test_labels;

  PooledDataset pooled() const;
};

inline constexpr const char* kBiasFeature = "bias";

void write_model_json(std::ostream& out, const LlrModel& model);
void write_model_json(const std::string& path, const LlrModel& model);
LlrModel read_model_json(std::istream& in, const std::string& source = "<stream>");
LlrModel read_model_json(const std::string& path);

}  // namespace ratioscope
