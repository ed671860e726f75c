#pragma once

#include "rsvm/types.hpp"

#include <span>
#include <variant>
#include <vector>

namespace rsvm {

/// Linear map A : R^{pq} -> R^m acting on vec(X) (column-major).
///
/// Completion operators store the observed linear indices i + j*p and act
/// matrix-free; dense sensing operators store the m x pq matrix.
class MeasurementOperator {
public:
  struct Completion {
    std::vector<Index> indices;
  };
  struct DenseSensing {
    Matrix matrix;
  };

  static MeasurementOperator completion(Index p, Index q, std::vector<Index> indices);
  static MeasurementOperator dense(Index p, Index q, Matrix matrix);

  Index p() const { return p_; }
  Index q() const { return q_; }
  Index m() const { return m_; }
  Index n() const { return p_ * q_; }

  bool is_completion() const { return std::holds_alternative<Completion>(kind_); }
  const std::vector<Index> &indices() const;
  const Matrix &matrix() const;

  /// A v
  Vector forward(const Vector &v) const;
  /// A^T w
  Vector adjoint(const Vector &w) const;
  /// A M for an n x k matrix M.
  Matrix apply(const Matrix &m) const;
  /// A^T A as a dense n x n matrix.
  Matrix gram() const;
  /// Columns of A restricted to the given vec indices (m x |cols|).
  Matrix columns(std::span<const Index> cols) const;
  /// Dense m x n materialization.
  Matrix to_dense() const;

private:
  MeasurementOperator(Index p, Index q, Index m, std::variant<Completion, DenseSensing> kind)
      : p_(p), q_(q), m_(m), kind_(std::move(kind)) {}

  Index p_ = 0, q_ = 0, m_ = 0;
  std::variant<Completion, DenseSensing> kind_;
};

} // namespace rsvm
