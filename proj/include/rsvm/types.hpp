#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace rsvm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Cholesky factorization failed even after jitter escalation.
class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Iteration produced non-finite values or an otherwise unusable state.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace rsvm
