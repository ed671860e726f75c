#include "rsvm/instance_io.hpp"

#include <fstream>

namespace rsvm {

namespace {

nlohmann::json rows_of(const Matrix &m) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_of(const nlohmann::json &rows, Index expect_rows, Index expect_cols, const char *what) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != expect_rows)
    throw DimensionError(std::string("instance: '") + what + "' has the wrong number of rows");
  Matrix m(expect_rows, expect_cols);
  for (Index i = 0; i < expect_rows; ++i) {
    const auto &row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != expect_cols)
      throw DimensionError(std::string("instance: '") + what + "' has a row of the wrong length");
    for (Index j = 0; j < expect_cols; ++j)
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

} // namespace

nlohmann::json instance_to_json(const ProblemInstance &inst) {
  nlohmann::json doc;
  doc["p"] = inst.p();
  doc["q"] = inst.q();
  doc["m"] = inst.m();
  if (inst.op.is_completion()) {
    doc["kind"] = "completion";
    doc["indices"] = inst.op.indices();
  } else {
    doc["kind"] = "dense";
    doc["matrix"] = rows_of(inst.op.matrix());
  }
  doc["y"] = std::vector<double>(inst.y.begin(), inst.y.end());
  doc["sigma_n"] = inst.sigma_n;
  if (inst.ground_truth)
    doc["ground_truth"] = rows_of(*inst.ground_truth);
  return doc;
}

ProblemInstance instance_from_json(const nlohmann::json &doc) {
  const Index p = doc.at("p").get<Index>();
  const Index q = doc.at("q").get<Index>();
  const Index m = doc.at("m").get<Index>();
  const auto kind = doc.at("kind").get<std::string>();

  auto op = [&] {
    if (kind == "completion") {
      auto idx = doc.at("indices").get<std::vector<Index>>();
      if (static_cast<Index>(idx.size()) != m)
        throw DimensionError("instance: indices length does not match m");
      return MeasurementOperator::completion(p, q, std::move(idx));
    }
    if (kind == "dense")
      return MeasurementOperator::dense(p, q, matrix_of(doc.at("matrix"), m, p * q, "matrix"));
    throw std::invalid_argument("instance: unknown kind '" + kind + "'");
  }();

  const auto yv = doc.at("y").get<std::vector<double>>();
  if (static_cast<Index>(yv.size()) != m)
    throw DimensionError("instance: y length does not match m");
  Vector y = Eigen::Map<const Vector>(yv.data(), m);

  std::optional<Matrix> truth;
  if (doc.contains("ground_truth") && !doc["ground_truth"].is_null())
    truth = matrix_of(doc["ground_truth"], p, q, "ground_truth");
  return ProblemInstance{std::move(op), std::move(y), std::move(truth),
                         doc.value("sigma_n", 0.0)};
}

void save_instance(const ProblemInstance &inst, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << instance_to_json(inst).dump() << '\n';
  if (!out)
    throw std::runtime_error("failed writing '" + path.string() + "'");
}

ProblemInstance load_instance(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "'");
  return instance_from_json(nlohmann::json::parse(in));
}

} // namespace rsvm
