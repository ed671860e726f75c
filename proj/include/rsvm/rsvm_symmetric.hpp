#pragma once

#include "rsvm/kron_ops.hpp"
#include "rsvm/rsvm_core.hpp"

namespace rsvm {

/// State of the single-precision solver for symmetric X in R^{p x p}.
struct SymmetricState {
  Matrix x_hat;
  Matrix alpha;
  double beta = 1.0;
  KronSum sigma_kron;
  Index s_terms = 0;
};

/// p^2 for p <= 12, otherwise p.
Index default_symmetric_terms(Index p);

struct SymmetricContractions {
  Matrix sigma_l;
  Matrix sigma_r;
};

/// Sigma_L and Sigma_R from a Kronecker-sum covariance sum_k outer_k kron inner_k:
///   Sigma_L = sum_k tr(inner_k alpha) outer_k^T
///   Sigma_R = sum_k tr(outer_k alpha) inner_k^T
/// which equal trace_contract_left/right of the reconstructed covariance.
SymmetricContractions symmetric_contractions(const KronSum &sigma, const Matrix &alpha);

/// dof (2 X alpha X + Sigma_R + Sigma_L + eps I)^{-1}, dof = hyper.symmetric_dof(p)
Matrix update_precision_symmetric(const SymmetricState &state, const Hyperparameters &hyper);

/// alpha * tr(alpha^-1) / ||X||_F, so that tr(alpha^-1)^2 = ||X||_F^2 afterwards.
Matrix balance_symmetric(const Matrix &alpha, const Matrix &x_hat);

/// s_terms = 0 selects default_symmetric_terms(p). balance_symmetric is applied
/// only under ScaleRule::Balanced.
Estimate solve_symmetric(const ProblemInstance &inst, const Hyperparameters &hyper, Index s_terms = 0);

} // namespace rsvm
