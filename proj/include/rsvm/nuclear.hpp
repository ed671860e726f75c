#pragma once

#include "rsvm/rsvm_core.hpp"

#include <optional>
#include <vector>

namespace rsvm {

struct NuclearConfig {
  double delta = 0.0;
  double lambda_low = 1e-8;
  double lambda_high = 0.0; // 0 selects 2 ||A^T y||
  double fista_tol = 1e-8;
  double bisect_tol = 1e-3;
  int max_fista_iter = 5000;
  int max_bisect_iter = 60;

  void validate() const;
};

/// Soft-thresholds the singular values of x by tau.
Matrix svt_prox(const Matrix &x, double tau);

/// Largest eigenvalue of A^T A by power iteration (exactly 1 for completion).
double operator_norm_sq(const MeasurementOperator &op);

struct LagrangianResult {
  Matrix x_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
};

/// argmin 1/2 ||y - A vec(X)||^2 + lambda ||X||_* by monotone accelerated
/// proximal gradient with step 1/L (L doubled whenever the quadratic upper
/// bound fails). Stops when the relative objective change falls below
/// fista_tol; otherwise returns the best iterate with converged = false.
LagrangianResult solve_lagrangian(const ProblemInstance &inst, double lambda, const NuclearConfig &cfg,
                                  const std::optional<Matrix> &warm_start = std::nullopt);

double lagrangian_objective(const ProblemInstance &inst, const Matrix &x, double lambda);

struct ConstrainedResult {
  Estimate estimate;
  double lambda = 0.0;
  double residual = 0.0;
  bool feasible = true; // false: bracket exhausted, nearest feasible iterate returned
};

/// argmin ||X||_* subject to ||y - A vec(X)||_2 <= delta, by bisection on the
/// Lagrangian weight in log space until | ||y - A x|| - delta | <= bisect_tol delta.
ConstrainedResult solve_constrained(const ProblemInstance &inst, double delta, const NuclearConfig &cfg);

/// sigma_n sqrt(m + sqrt(8 m))
double delta_from_sigma(Index m, double sigma_n);

} // namespace rsvm
