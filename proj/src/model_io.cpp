#include "ratioscope/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "ratioscope/error.hpp"

namespace ratioscope {

using nlohmann::json;

namespace {

json rows_of(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_of(const json& rows, Eigen::Index n_rows, Eigen::Index n_cols,
                          const char* field) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n_rows)
    throw Error(ErrorKind::kParse, std::string("model field '") + field + "' has the wrong row count");
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols)
      throw Error(ErrorKind::kParse, std::string("model field '") + field + "' has a ragged row");
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_of(const json& values, Eigen::Index n, const char* field) {
  if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != n)
    throw Error(ErrorKind::kParse, std::string("model field '") + field + "' has the wrong length");
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = values[static_cast<std::size_t>(k)].get<double>();
  return v;
}

}  // namespace

PooledDataset LlrModel::pooled() const {
  PooledDataset p;
  p.features = features;
  p.n_inlier = n_inlier;
  p.n_test = n_test;
  p.labels = Eigen::VectorXd::Constant(n_inlier + n_test, -1.0);
  p.labels.head(n_inlier).setOnes();
  p.feature_names = feature_names;
  p.sample_ids = sample_ids;
  return p;
}

void write_model_json(std::ostream& out, const LlrModel& model) {
  json doc;
  doc["feature_names"] = model.feature_names;
  doc["n_inlier"] = model.n_inlier;
  doc["n_test"] = model.n_test;
  doc["lambda1"] = model.hp.lambda1;
  doc["lambda2"] = model.hp.lambda2;
  doc["k_neighbors"] = model.hp.k_neighbors;
  doc["sigma2"] = model.hp.sigma2.value_or(0.0);
  doc["epsilon"] = model.hp.epsilon;
  doc["outer_max_iters"] = model.hp.outer_max_iters;
  doc["outer_rel_tol"] = model.hp.outer_rel_tol;
  doc["inner_max_iters"] = model.hp.inner_max_iters;
  doc["inner_grad_tol"] = model.hp.inner_grad_tol;
  doc["converged"] = model.converged;
  doc["iterations"] = model.iterations;
  doc["intercept"] = model.intercept;
  doc["weights"] = rows_of(model.weights);
  doc["objective_trace"] = model.objective_trace;
  doc["standardizer"] = {
      {"mean", std::vector<double>(model.standardizer.mean.begin(), model.standardizer.mean.end())},
      {"scale", std::vector<double>(model.standardizer.scale.begin(), model.standardizer.scale.end())}};
  doc["sample_ids"] = model.sample_ids;
  doc["features"] = rows_of(model.features);
  if (model.test_labels) {
    json labels = json::array();
    for (Label l : *model.test_labels) labels.push_back(to_string(l));
    doc["test_labels"] = std::move(labels);
  }
  out << doc.dump(1) << '\n';
}

void write_model_json(const std::string& path, const LlrModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  write_model_json(out, model);
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path);
}

LlrModel read_model_json(std::istream& in, const std::string& source) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, source + ": " + e.what());
  }
  try {
    LlrModel m;
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.n_inlier = doc.at("n_inlier").get<Eigen::Index>();
    m.n_test = doc.at("n_test").get<Eigen::Index>();
    m.hp.lambda1 = doc.at("lambda1").get<double>();
    m.hp.lambda2 = doc.at("lambda2").get<double>();
    m.hp.k_neighbors = doc.at("k_neighbors").get<int>();
    m.hp.sigma2 = doc.at("sigma2").get<double>();
    m.hp.epsilon = doc.at("epsilon").get<double>();
    m.hp.outer_max_iters = doc.value("outer_max_iters", m.hp.outer_max_iters);
    m.hp.outer_rel_tol = doc.value("outer_rel_tol", m.hp.outer_rel_tol);
    m.hp.inner_max_iters = doc.value("inner_max_iters", m.hp.inner_max_iters);
    m.hp.inner_grad_tol = doc.value("inner_grad_tol", m.hp.inner_grad_tol);
    m.converged = doc.value("converged", false);
    m.iterations = doc.value("iterations", 0);
    m.intercept = doc.value("intercept", false);
    m.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
    m.sample_ids = doc.at("sample_ids").get<std::vector<std::string>>();

    const auto d = static_cast<Eigen::Index>(m.feature_names.size());
    const Eigen::Index total = m.n_inlier + m.n_test;
    if (d < 1 || m.n_inlier < 1 || m.n_test < 1 || static_cast<Eigen::Index>(m.sample_ids.size()) != total)
      throw Error(ErrorKind::kParse, source + ": inconsistent model sizes");
    m.weights = matrix_of(doc.at("weights"), d, total, "weights");
    m.features = matrix_of(doc.at("features"), d, total, "features");
    const json& st = doc.at("standardizer");
    const Eigen::Index raw_d = m.intercept ? d - 1 : d;
    m.standardizer.mean = vector_of(st.at("mean"), raw_d, "standardizer.mean");
    m.standardizer.scale = vector_of(st.at("scale"), raw_d, "standardizer.scale");
    if (doc.contains("test_labels")) {
      std::vector<Label> labels;
      for (const auto& l : doc["test_labels"]) labels.push_back(parse_label(l.get<std::string>()));
      if (static_cast<Eigen::Index>(labels.size()) != m.n_test)
        throw Error(ErrorKind::kParse, source + ": test_labels length differs from n_test");
      m.test_labels = std::move(labels);
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, source + ": " + e.what());
  }
}

LlrModel read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return read_model_json(in, path);
}

}  // namespace ratioscope
