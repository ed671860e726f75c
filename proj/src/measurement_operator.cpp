#include "rsvm/measurement_operator.hpp"

#include <string>
#include <unordered_set>

namespace rsvm {

MeasurementOperator MeasurementOperator::completion(Index p, Index q, std::vector<Index> indices) {
  if (p <= 0 || q <= 0)
    throw DimensionError("completion operator: p and q must be positive");
  std::unordered_set<Index> seen;
  for (Index idx : indices) {
    if (idx < 0 || idx >= p * q)
      throw DimensionError("completion operator: index " + std::to_string(idx) + " out of range");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("completion operator: duplicate index " + std::to_string(idx));
  }
  const Index m = static_cast<Index>(indices.size());
  return MeasurementOperator(p, q, m, Completion{std::move(indices)});
}

MeasurementOperator MeasurementOperator::dense(Index p, Index q, Matrix matrix) {
  if (p <= 0 || q <= 0 || matrix.cols() != p * q)
    throw DimensionError("dense operator: matrix must have p*q columns");
  const Index m = matrix.rows();
  return MeasurementOperator(p, q, m, DenseSensing{std::move(matrix)});
}

const std::vector<Index> &MeasurementOperator::indices() const {
  if (const auto *c = std::get_if<Completion>(&kind_))
    return c->indices;
  throw std::logic_error("indices() called on a dense sensing operator");
}

const Matrix &MeasurementOperator::matrix() const {
  if (const auto *d = std::get_if<DenseSensing>(&kind_))
    return d->matrix;
  throw std::logic_error("matrix() called on a completion operator");
}

Vector MeasurementOperator::forward(const Vector &v) const {
  if (v.size() != n())
    throw DimensionError("forward: vector length does not match p*q");
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    Vector out(m_);
    for (Index r = 0; r < m_; ++r)
      out(r) = v(c->indices[static_cast<std::size_t>(r)]);
    return out;
  }
  return std::get<DenseSensing>(kind_).matrix * v;
}

Vector MeasurementOperator::adjoint(const Vector &w) const {
  if (w.size() != m_)
    throw DimensionError("adjoint: vector length does not match m");
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    Vector out = Vector::Zero(n());
    for (Index r = 0; r < m_; ++r)
      out(c->indices[static_cast<std::size_t>(r)]) = w(r);
    return out;
  }
  return std::get<DenseSensing>(kind_).matrix.transpose() * w;
}

Matrix MeasurementOperator::apply(const Matrix &mat) const {
  if (mat.rows() != n())
    throw DimensionError("apply: row count does not match p*q");
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    Matrix out(m_, mat.cols());
    for (Index r = 0; r < m_; ++r)
      out.row(r) = mat.row(c->indices[static_cast<std::size_t>(r)]);
    return out;
  }
  return std::get<DenseSensing>(kind_).matrix * mat;
}

Matrix MeasurementOperator::gram() const {
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    Matrix out = Matrix::Zero(n(), n());
    for (Index idx : c->indices)
      out(idx, idx) = 1.0;
    return out;
  }
  const Matrix &a = std::get<DenseSensing>(kind_).matrix;
  Matrix out = Matrix::Zero(n(), n());
  out.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  return out.selfadjointView<Eigen::Lower>();
}

Matrix MeasurementOperator::columns(std::span<const Index> cols) const {
  Matrix out(m_, static_cast<Index>(cols.size()));
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    out.setZero();
    std::vector<Index> row_of(static_cast<std::size_t>(n()), -1);
    for (Index r = 0; r < m_; ++r)
      row_of[static_cast<std::size_t>(c->indices[static_cast<std::size_t>(r)])] = r;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const Index r = row_of[static_cast<std::size_t>(cols[k])];
      if (r >= 0)
        out(r, static_cast<Index>(k)) = 1.0;
    }
    return out;
  }
  const Matrix &a = std::get<DenseSensing>(kind_).matrix;
  for (std::size_t k = 0; k < cols.size(); ++k)
    out.col(static_cast<Index>(k)) = a.col(cols[k]);
  return out;
}

Matrix MeasurementOperator::to_dense() const {
  if (const auto *c = std::get_if<Completion>(&kind_)) {
    Matrix out = Matrix::Zero(m_, n());
    for (Index r = 0; r < m_; ++r)
      out(r, c->indices[static_cast<std::size_t>(r)]) = 1.0;
    return out;
  }
  return std::get<DenseSensing>(kind_).matrix;
}

} // namespace rsvm
