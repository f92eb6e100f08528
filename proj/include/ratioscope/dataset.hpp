#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ratioscope {

enum class Label { kInlier, kOutlier };

const char* to_string(Label label);
Label parse_label(const std::string& text);

// Column-oriented sample container: d features (rows) by m samples (columns).
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, std::vector<std::string> feature_names,
          std::vector<std::string> sample_ids);

  // Convenience constructor: names "f1".."fd" and ids "<id_prefix><k>".
  static Dataset from_matrix(Eigen::MatrixXd features, const std::string& id_prefix = "s");

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  Eigen::Index dim() const { return features_.rows(); }
  Eigen::Index size() const { return features_.cols(); }

  // Subset of columns in the given order.
  Dataset select(const std::vector<Eigen::Index>& columns) const;

 private:
  Eigen::MatrixXd features_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> sample_ids_;
};

// Inliers (label +1) occupy columns [0, n_inlier), test samples (label -1)
// occupy [n_inlier, n_inlier + n_test).
struct PooledDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  Eigen::Index n_inlier = 0;
  Eigen::Index n_test = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> sample_ids;

  Eigen::Index dim() const { return features.rows(); }
  Eigen::Index size() const { return features.cols(); }
  // Prior-ratio factor n / n' of the ratio model.
  double prior_ratio() const { return static_cast<double>(n_test) / static_cast<double>(n_inlier); }
};

PooledDataset pool(const Dataset& inliers, const Dataset& test);

struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static StandardizationStats identity(Eigen::Index dim);
};

inline constexpr double kScaleFloor = 1e-8;

// Per-feature mean and population standard deviation (divisor m), floored.
StandardizationStats fit_standardizer(const Dataset& inliers);
Dataset apply_standardizer(const Dataset& data, const StandardizationStats& stats);

// A dataset read from CSV together with its optional "label" column.
struct LabeledDataset {
  Dataset data;
  std::optional<std::vector<Label>> labels;
};

// First row holds feature names; an optional leading "sample_id" column and an
// optional trailing "label" column ({inlier, outlier}) are recognised.
LabeledDataset read_csv(const std::string& path);
LabeledDataset parse_csv(std::istream& in, const std::string& source = "<stream>");
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<Label>* labels = nullptr);
void write_csv(std::ostream& out, const Dataset& data, const std::vector<Label>* labels = nullptr);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace ratioscope
