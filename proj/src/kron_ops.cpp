#include "rsvm/kron_ops.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace rsvm {

Matrix kron(const Matrix &a, const Matrix &b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix &x) { return x.reshaped(); }

Matrix unvec(const Vector &v, Index p, Index q) {
  if (p < 0 || q < 0 || v.size() != p * q)
    throw DimensionError("unvec: vector of length " + std::to_string(v.size()) +
                         " cannot be reshaped to " + std::to_string(p) + "x" +
                         std::to_string(q));
  return v.reshaped(p, q);
}

namespace {

Index inner_dim(const Matrix &sigma, Index outer, const char *who) {
  if (sigma.rows() != sigma.cols() || outer <= 0 || sigma.rows() % outer != 0)
    throw DimensionError(std::string(who) + ": covariance of size " +
                         std::to_string(sigma.rows()) + "x" + std::to_string(sigma.cols()) +
                         " is not compatible with factor dimension " + std::to_string(outer));
  return sigma.rows() / outer;
}

} // namespace

Matrix trace_contract_right(const Matrix &sigma, const Matrix &alpha_r) {
  if (alpha_r.rows() != alpha_r.cols())
    throw DimensionError("trace_contract_right: alpha_r not square");
  const Index q = alpha_r.rows();
  const Index p = inner_dim(sigma, q, "trace_contract_right");
  // Sigma_R = sum_{a,b} alpha_r(a,b) * Block(b,a)^T, blocks are p x p.
  Matrix acc = Matrix::Zero(p, p);
  for (Index a = 0; a < q; ++a)
    for (Index b = 0; b < q; ++b) {
      const double w = alpha_r(a, b);
      if (w != 0.0)
        acc.noalias() += w * sigma.block(b * p, a * p, p, p);
    }
  return acc.transpose();
}

Matrix trace_contract_left(const Matrix &sigma, const Matrix &alpha_l) {
  if (alpha_l.rows() != alpha_l.cols())
    throw DimensionError("trace_contract_left: alpha_l not square");
  const Index p = alpha_l.rows();
  const Index q = inner_dim(sigma, p, "trace_contract_left");
  // Sigma_L(k,l) = tr(Block(l,k) alpha_l)
  const Matrix at = alpha_l.transpose();
  Matrix out(q, q);
  for (Index k = 0; k < q; ++k)
    for (Index l = 0; l < q; ++l)
      out(k, l) = sigma.block(l * p, k * p, p, p).cwiseProduct(at).sum();
  return out;
}

Eigen::LLT<Matrix> spd_factor(const Matrix &m, double jitter) {
  if (m.rows() != m.cols())
    throw DimensionError("spd_factor: matrix not square");
  const Index n = m.rows();
  auto attempt = [&](double j) {
    Matrix shifted = m;
    if (j != 0.0)
      shifted.diagonal().array() += j;
    return Eigen::LLT<Matrix>(shifted);
  };
  Eigen::LLT<Matrix> llt = attempt(jitter);
  if (llt.info() == Eigen::Success && m.allFinite())
    return llt;
  if (!m.allFinite())
    throw FactorizationError("spd_factor: matrix has non-finite entries");

  const double tr = std::abs(m.trace());
  double j = std::max(jitter, 1e-12 * (tr > 0 ? tr : 1.0) / static_cast<double>(std::max<Index>(n, 1)));
  for (int retry = 0; retry <= 3; ++retry, j *= 10.0) {
    llt = attempt(j);
    if (llt.info() == Eigen::Success)
      return llt;
  }
  throw FactorizationError("spd_factor: Cholesky failed after jitter escalation (last jitter " +
                           std::to_string(j / 10.0) + ")");
}

Matrix spd_inverse(const Matrix &m, double jitter) {
  const auto llt = spd_factor(m, jitter);
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return symmetrize(inv);
}

Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

bool is_spd(const Matrix &m, double sym_tol) {
  if (m.rows() != m.cols() || !m.allFinite())
    return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale)
    return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0;
}

Matrix psd_sqrt(const Matrix &m) {
  if (m.rows() != m.cols())
    throw DimensionError("psd_sqrt: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  if (es.info() != Eigen::Success)
    throw FactorizationError("psd_sqrt: eigendecomposition failed");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix posterior_covariance(const Matrix &alpha_l, const Matrix &alpha_r,
                            const MeasurementOperator &a, double beta,
                            CovariancePath path, double jitter) {
  if (!(beta > 0.0))
    throw std::invalid_argument("posterior_covariance: beta must be positive");
  if (alpha_l.rows() != a.p() || alpha_r.rows() != a.q())
    throw DimensionError("posterior_covariance: precision sizes do not match operator");
  const Index n = a.n();
  if (path == CovariancePath::Auto)
    path = (2 * a.m() < n) ? CovariancePath::Woodbury : CovariancePath::Direct;

  if (path == CovariancePath::Direct) {
    Matrix h = kron(alpha_r, alpha_l);
    if (a.is_completion()) {
      for (Index idx : a.indices())
        h(idx, idx) += beta;
    } else {
      h.noalias() += beta * a.gram();
    }
    return spd_inverse(h, jitter);
  }

  // Woodbury: Sigma = P^-1 - P^-1 A^T (I/beta + A P^-1 A^T)^-1 A P^-1
  const Matrix prior = kron(spd_inverse(alpha_r, jitter), spd_inverse(alpha_l, jitter));
  const Matrix b = a.apply(prior); // A P^-1, m x n
  Matrix inner = a.apply(b.transpose());
  inner.diagonal().array() += 1.0 / beta;
  const auto llt = spd_factor(symmetrize(inner), jitter);
  Matrix sigma = prior;
  sigma.noalias() -= b.transpose() * llt.solve(b);
  return symmetrize(sigma);
}

Matrix KronSum::reconstruct() const {
  if (terms.empty())
    return Matrix();
  Matrix out = kron(terms.front().outer, terms.front().inner);
  for (std::size_t k = 1; k < terms.size(); ++k)
    out += kron(terms[k].outer, terms[k].inner);
  return out;
}

KronSum nearest_kron_sum(const Matrix &sigma, Index p, Index s) {
  if (p <= 0 || sigma.rows() != p * p || sigma.cols() != p * p)
    throw DimensionError("nearest_kron_sum: expected a p^2 x p^2 matrix");
  const Index pp = p * p;
  if (s < 1 || s > pp)
    throw std::invalid_argument("nearest_kron_sum: term count out of range");

  // Row i + j*p holds vec of block (i,j); rank-1 terms of this matrix are
  // exactly the Kronecker terms of sigma.
  Matrix rearranged(pp, pp);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i)
      rearranged.row(i + j * p) = sigma.block(i * p, j * p, p, p).reshaped().transpose();

  Eigen::BDCSVD<Matrix> svd(rearranged, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector &sv = svd.singularValues();
  KronSum out;
  out.terms.reserve(static_cast<std::size_t>(s));
  for (Index k = 0; k < s; ++k) {
    const double root = std::sqrt(sv(k));
    Vector u = root * svd.matrixU().col(k);
    Vector v = root * svd.matrixV().col(k);
    out.terms.push_back({unvec(u, p, p), unvec(v, p, p)});
  }
  return out;
}

} // namespace rsvm
