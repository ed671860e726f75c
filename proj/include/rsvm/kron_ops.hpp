#pragma once

#include "rsvm/measurement_operator.hpp"
#include "rsvm/types.hpp"

#include <vector>

namespace rsvm {

/// Kronecker product; entry (i*b.rows()+k, j*b.cols()+l) = a(i,j) * b(k,l).
Matrix kron(const Matrix &a, const Matrix &b);

/// Column-stacking vectorization. With this convention
/// tr(aL X aR X^T) = vec(X)^T (aR kron aL) vec(X).
Vector vec(const Matrix &x);
Matrix unvec(const Vector &v, Index p, Index q);

/// Sigma_R(k,l) = tr(Sigma (alpha_r kron E_kl)), a p x p matrix.
Matrix trace_contract_right(const Matrix &sigma, const Matrix &alpha_r);

/// Sigma_L(k,l) = tr(Sigma (E_kl kron alpha_l)), a q x q matrix.
Matrix trace_contract_left(const Matrix &sigma, const Matrix &alpha_l);

/// (m + jitter I)^{-1} through a Cholesky factorization. On failure the
/// jitter is raised to at least 1e-12 tr(m)/dim and multiplied by 10 up to
/// three times before giving up with FactorizationError.
Matrix spd_inverse(const Matrix &m, double jitter = 0.0);

/// Cholesky factor of m with the same jitter escalation as spd_inverse.
Eigen::LLT<Matrix> spd_factor(const Matrix &m, double jitter = 0.0);

enum class CovariancePath { Auto, Direct, Woodbury };

/// Sigma = ((alpha_r kron alpha_l) + beta A^T A)^{-1}.
/// Auto picks the Woodbury form when m < pq/2.
Matrix posterior_covariance(const Matrix &alpha_l, const Matrix &alpha_r,
                            const MeasurementOperator &a, double beta,
                            CovariancePath path = CovariancePath::Auto,
                            double jitter = 0.0);

/// Sigma ~= sum_k outer_k kron inner_k.
struct KronSum {
  struct Term {
    Matrix outer;
    Matrix inner;
  };
  std::vector<Term> terms;

  Matrix reconstruct() const;
};

/// Best s-term Kronecker-sum approximation of a p^2 x p^2 matrix, obtained
/// from the leading singular triplets of its block rearrangement.
KronSum nearest_kron_sum(const Matrix &sigma, Index p, Index s);

/// Symmetrized copy, (m + m^T)/2.
Matrix symmetrize(const Matrix &m);

bool is_spd(const Matrix &m, double sym_tol = 1e-12);

/// Symmetric square root of a PSD matrix; negative rounding-level
/// eigenvalues are clamped to zero.
Matrix psd_sqrt(const Matrix &m);

} // namespace rsvm
