#include "ratioscope/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ratioscope/error.hpp"

namespace ratioscope {

const char* to_string(Label label) { return label == Label::kInlier ? "inlier" : "outlier"; }

Label parse_label(const std::string& text) {
  if (text == "inlier") return Label::kInlier;
  if (text == "outlier") return Label::kOutlier;
  throw Error(ErrorKind::kParse, "label must be 'inlier' or 'outlier', got '" + text + "'");
}

Dataset::Dataset(Eigen::MatrixXd features, std::vector<std::string> feature_names,
                 std::vector<std::string> sample_ids)
    : features_(std::move(features)),
      feature_names_(std::move(feature_names)),
      sample_ids_(std::move(sample_ids)) {
  if (features_.rows() < 1 || features_.cols() < 1)
    throw Error(ErrorKind::kInvalidArgument, "dataset needs at least one feature and one sample");
  if (!features_.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "dataset contains non-finite values");
  if (static_cast<Eigen::Index>(feature_names_.size()) != features_.rows())
    throw Error(ErrorKind::kDimensionMismatch, "feature_names length differs from feature count");
  if (static_cast<Eigen::Index>(sample_ids_.size()) != features_.cols())
    throw Error(ErrorKind::kDimensionMismatch, "sample_ids length differs from sample count");
  std::unordered_set<std::string> seen;
  for (const auto& id : sample_ids_) {
    if (!seen.insert(id).second)
      throw Error(ErrorKind::kInvalidArgument, "duplicate sample id '" + id + "'");
  }
}

Dataset Dataset::from_matrix(Eigen::MatrixXd features, const std::string& id_prefix) {
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < features.rows(); ++k) names.push_back("f" + std::to_string(k + 1));
  std::vector<std::string> ids;
  for (Eigen::Index j = 0; j < features.cols(); ++j) ids.push_back(id_prefix + std::to_string(j));
  return Dataset(std::move(features), std::move(names), std::move(ids));
}

Dataset Dataset::select(const std::vector<Eigen::Index>& columns) const {
  Eigen::MatrixXd sub(dim(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> ids;
  ids.reserve(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] < 0 || columns[c] >= size())
      throw Error(ErrorKind::kInvalidArgument, "column index out of range");
    sub.col(static_cast<Eigen::Index>(c)) = features_.col(columns[c]);
    ids.push_back(sample_ids_[static_cast<std::size_t>(columns[c])]);
  }
  return Dataset(std::move(sub), feature_names_, std::move(ids));
}

PooledDataset pool(const Dataset& inliers, const Dataset& test) {
  if (inliers.dim() != test.dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "inliers have " + std::to_string(inliers.dim()) + " features, test has " +
                    std::to_string(test.dim()));
  if (inliers.feature_names() != test.feature_names())
    throw Error(ErrorKind::kDimensionMismatch, "feature names differ between inliers and test");

  PooledDataset pooled;
  pooled.n_inlier = inliers.size();
  pooled.n_test = test.size();
  pooled.features.resize(inliers.dim(), pooled.n_inlier + pooled.n_test);
  pooled.features.leftCols(pooled.n_inlier) = inliers.features();
  pooled.features.rightCols(pooled.n_test) = test.features();
  pooled.labels.resize(pooled.n_inlier + pooled.n_test);
  pooled.labels.head(pooled.n_inlier).setConstant(1.0);
  pooled.labels.tail(pooled.n_test).setConstant(-1.0);
  pooled.feature_names = inliers.feature_names();
  pooled.sample_ids = inliers.sample_ids();
  pooled.sample_ids.insert(pooled.sample_ids.end(), test.sample_ids().begin(),
                           test.sample_ids().end());
  return pooled;
}

StandardizationStats StandardizationStats::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

StandardizationStats fit_standardizer(const Dataset& inliers) {
  if (inliers.size() < 2)
    throw Error(ErrorKind::kTooFewSamples, "standardizer needs at least 2 inlier samples");
  const auto& x = inliers.features();
  const double m = static_cast<double>(x.cols());
  StandardizationStats stats;
  stats.mean = x.rowwise().sum() / m;
  const Eigen::MatrixXd centered = x.colwise() - stats.mean;
  stats.scale = (centered.array().square().rowwise().sum() / m).sqrt().max(kScaleFloor);
  return stats;
}

Dataset apply_standardizer(const Dataset& data, const StandardizationStats& stats) {
  if (stats.mean.size() != data.dim() || stats.scale.size() != data.dim())
    throw Error(ErrorKind::kDimensionMismatch, "standardizer dimension differs from data");
  Eigen::MatrixXd z = (data.features().colwise() - stats.mean).array().colwise() / stats.scale.array();
  return Dataset(std::move(z), data.feature_names(), data.sample_ids());
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw Error(ErrorKind::kParse, where + ": cannot parse '" + text + "' as a number");
  return value;
}

}  // namespace

LabeledDataset parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kParse, source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_row(line);
  const bool has_ids = !header.empty() && header.front() == "sample_id";
  const bool has_labels = !header.empty() && header.back() == "label";
  const std::size_t first = has_ids ? 1 : 0;
  const std::size_t last = header.size() - (has_labels ? 1 : 0);
  if (last <= first) throw Error(ErrorKind::kParse, source + ": no feature columns");
  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first),
                                 header.begin() + static_cast<std::ptrdiff_t>(last));

  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_row(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size())
      throw Error(ErrorKind::kParse, where + ": expected " + std::to_string(header.size()) +
                                         " cells, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(last - first);
    for (std::size_t c = first; c < last; ++c) row.push_back(parse_double(cells[c], where));
    rows.push_back(std::move(row));
    ids.push_back(has_ids ? cells.front() : "row" + std::to_string(rows.size()));
    if (has_labels) labels.push_back(parse_label(cells.back()));
  }
  if (rows.empty()) throw Error(ErrorKind::kParse, source + ": no samples");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t k = 0; k < names.size(); ++k)
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[j][k];

  LabeledDataset out{Dataset(std::move(x), std::move(names), std::move(ids)), std::nullopt};
  if (has_labels) out.labels = std::move(labels);
  return out;
}

LabeledDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

void write_csv(std::ostream& out, const Dataset& data, const std::vector<Label>* labels) {
  if (labels && static_cast<Eigen::Index>(labels->size()) != data.size())
    throw Error(ErrorKind::kDimensionMismatch, "label count differs from sample count");
  out << "sample_id";
  for (const auto& name : data.feature_names()) out << ',' << name;
  if (labels) out << ",label";
  out << '\n';
  for (Eigen::Index j = 0; j < data.size(); ++j) {
    out << data.sample_ids()[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < data.dim(); ++k) out << ',' << format_double(data.features()(k, j));
    if (labels) out << ',' << to_string((*labels)[static_cast<std::size_t>(j)]);
    out << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& data, const std::vector<Label>* labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  write_csv(out, data, labels);
}

}  // namespace ratioscope
