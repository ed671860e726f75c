#include "rsvm/kron_ops.hpp"
#include "rsvm/sensing.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace rsvm;

namespace {

Matrix random_spd(Index n, Rng &rng) {
  std::normal_distribution<double> g;
  Matrix b(n, n);
  for (Index i = 0; i < b.size(); ++i)
    b.data()[i] = g(rng);
  return b * b.transpose() + 0.5 * Matrix::Identity(n, n);
}

Matrix basis(Index n, Index k, Index l) {
  Matrix e = Matrix::Zero(n, n);
  e(k, l) = 1.0;
  return e;
}

// Sigma_R(k,l) = tr(Sigma (aR kron E_kl))
Matrix naive_right(const Matrix &sigma, const Matrix &alpha_r, Index p) {
  Matrix out(p, p);
  for (Index k = 0; k < p; ++k)
    for (Index l = 0; l < p; ++l)
      out(k, l) = (sigma * kron(alpha_r, basis(p, k, l))).trace();
  return out;
}

Matrix naive_left(const Matrix &sigma, const Matrix &alpha_l, Index q) {
  Matrix out(q, q);
  for (Index k = 0; k < q; ++k)
    for (Index l = 0; l < q; ++l)
      out(k, l) = (sigma * kron(basis(q, k, l), alpha_l)).trace();
  return out;
}

double rel(const Matrix &a, const Matrix &b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace

TEST(Kron, IdentityLeftGivesBlockDiagonal) {
  Matrix b(2, 2);
  b << 1, 2, 3, 4;
  Matrix k = kron(Matrix::Identity(2, 2), b);
  Matrix expect = Matrix::Zero(4, 4);
  expect.block(0, 0, 2, 2) = b;
  expect.block(2, 2, 2, 2) = b;
  EXPECT_EQ(k, expect);
}

TEST(Kron, HandExpandedExample) {
  Matrix a(2, 2), b(2, 2), expect(4, 4);
  a << 1, 2, 3, 4;
  b << 0, 1, 1, 0;
  expect << 0, 1, 0, 2, 1, 0, 2, 0, 0, 3, 0, 4, 3, 0, 4, 0;
  EXPECT_EQ(kron(a, b), expect);
}

TEST(Kron, ScalarLeftFactorScales) {
  Matrix c(1, 1);
  c(0, 0) = -2.5;
  Matrix b = Matrix::Random(3, 2);
  EXPECT_EQ(kron(c, b), -2.5 * b);
}

TEST(Vec, ColumnMajorAndRoundTrip) {
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  Vector v = vec(x);
  EXPECT_EQ(v, (Vector(4) << 1, 3, 2, 4).finished());
  EXPECT_EQ(unvec(v, 2, 2), x);

  Matrix row(1, 3);
  row << 5, 6, 7;
  EXPECT_EQ(vec(row), (Vector(3) << 5, 6, 7).finished());
  EXPECT_THROW(unvec(v, 3, 2), DimensionError);
}

TEST(Vec, QuadraticFormIdentity) {
  Rng rng = stream_rng(11, {1});
  for (Index p = 1; p <= 5; ++p)
    for (Index q = 1; q <= 5; ++q) {
      Matrix al = random_spd(p, rng), ar = random_spd(q, rng);
      Matrix x = Matrix::Random(p, q);
      double lhs = (al * x * ar * x.transpose()).trace();
      Vector v = vec(x);
      double rhs = v.dot(kron(ar, al) * v);
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(rhs));
    }
}

TEST(TraceContract, IdentityCovariance) {
  Rng rng = stream_rng(11, {2});
  Matrix ar = random_spd(3, rng), al = random_spd(4, rng);
  Matrix sr = trace_contract_right(Matrix::Identity(12, 12), ar);
  EXPECT_LT(rel(sr, ar.trace() * Matrix::Identity(4, 4)), 1e-14);
  Matrix sl = trace_contract_left(Matrix::Identity(12, 12), al);
  EXPECT_LT(rel(sl, al.trace() * Matrix::Identity(3, 3)), 1e-14);
}

TEST(TraceContract, MatchesBasisLoopsOnRandomShapes) {
  Rng rng = stream_rng(11, {3});
  for (Index p = 1; p <= 5; ++p)
    for (Index q = 1; q <= 5; ++q) {
      Matrix sigma = random_spd(p * q, rng);
      Matrix ar = random_spd(q, rng), al = random_spd(p, rng);
      EXPECT_LT(rel(trace_contract_right(sigma, ar), naive_right(sigma, ar, p)), 1e-10) << p << "x" << q;
      EXPECT_LT(rel(trace_contract_left(sigma, al), naive_left(sigma, al, q)), 1e-10) << p << "x" << q;
    }
}

TEST(TraceContract, KroneckerCovariance) {
  Rng rng = stream_rng(11, {4});
  Index p = 3, q = 4;
  Matrix ar = random_spd(q, rng), m = Matrix::Random(p, p);
  Matrix sigma = kron(ar.inverse(), m);
  // tr(aR^-1 aR) = q, so only M^T-like structure remains
  EXPECT_LT(rel(trace_contract_right(sigma, ar), naive_right(sigma, ar, p)), 1e-10);
  EXPECT_LT(rel(trace_contract_right(sigma, ar), double(q) * m.transpose()), 1e-10);
}

TEST(TraceContract, SmallLeftPrecision) {
  Rng rng = stream_rng(11, {5});
  Index p = 2, q = 3;
  Matrix sigma = random_spd(p * q, rng);
  Matrix al = 1e-6 * Matrix::Identity(p, p);
  EXPECT_LT(rel(trace_contract_left(sigma, al), naive_left(sigma, al, q)), 1e-10);
}

TEST(TraceContract, RejectsBadShapes) {
  EXPECT_THROW(trace_contract_right(Matrix::Identity(6, 6), Matrix::Identity(4, 4)), DimensionError);
  EXPECT_THROW(trace_contract_left(Matrix::Identity(6, 5), Matrix::Identity(2, 2)), DimensionError);
}

TEST(SpdInverse, Examples) {
  EXPECT_EQ(spd_inverse(Matrix::Identity(3, 3)), Matrix::Identity(3, 3));
  Matrix d = Eigen::Vector2d(2, 4).asDiagonal();
  EXPECT_LT(rel(spd_inverse(d), Matrix(Eigen::Vector2d(0.5, 0.25).asDiagonal())), 1e-15);
  Rng rng = stream_rng(11, {6});
  Matrix s = random_spd(5, rng);
  EXPECT_LT((spd_inverse(s) * s - Matrix::Identity(5, 5)).norm(), 1e-10);
}

TEST(SpdInverse, JitterRescuesSemidefinite) {
  Matrix s = Matrix::Ones(3, 3); // rank one
  Matrix inv = spd_inverse(s);
  EXPECT_TRUE(inv.allFinite());
  EXPECT_THROW(spd_inverse(-Matrix::Identity(2, 2)), FactorizationError);
}

TEST(PosteriorCovariance, IdentityCase) {
  auto op = MeasurementOperator::completion(2, 3, {0, 1, 2, 3, 4, 5});
  Matrix s = posterior_covariance(Matrix::Identity(2, 2), Matrix::Identity(3, 3), op, 1.0);
  EXPECT_LT(rel(s, 0.5 * Matrix::Identity(6, 6)), 1e-14);
}

TEST(PosteriorCovariance, VanishingNoisePrecisionGivesPrior) {
  Rng rng = stream_rng(11, {7});
  Matrix al = random_spd(3, rng), ar = random_spd(2, rng);
  auto op = gaussian_operator(3, 2, 4, rng);
  Matrix s = posterior_covariance(al, ar, op, 1e-12);
  Matrix prior = kron(ar.inverse(), al.inverse());
  EXPECT_LT(rel(s, prior), 1e-9);
}

TEST(PosteriorCovariance, WoodburyMatchesDirect) {
  Rng rng = stream_rng(11, {8});
  for (int t = 0; t < 20; ++t) {
    Index p = 2 + t % 4, q = 2 + (t / 4) % 4;
    Index m = 1 + (t * 7) % (p * q);
    Matrix al = random_spd(p, rng), ar = random_spd(q, rng);
    auto op = t % 2 ? gaussian_operator(p, q, m, rng) : completion_operator(p, q, m, rng);
    Matrix d = posterior_covariance(al, ar, op, 3.0, CovariancePath::Direct);
    Matrix w = posterior_covariance(al, ar, op, 3.0, CovariancePath::Woodbury);
    EXPECT_LT(rel(w, d), 1e-8);
  }
}

TEST(KronSum, ExactKroneckerSingleTerm) {
  Rng rng = stream_rng(11, {9});
  Matrix a = random_spd(3, rng), b = random_spd(3, rng);
  KronSum ks = nearest_kron_sum(kron(a, b), 3, 1);
  ASSERT_EQ(ks.terms.size(), 1u);
  EXPECT_LT(rel(ks.reconstruct(), kron(a, b)), 1e-12);
  // The split is only defined up to a scalar.
  double c = ks.terms[0].outer(0, 0) / a(0, 0);
  EXPECT_LT(rel(ks.terms[0].outer, c * a), 1e-10);
}

TEST(KronSum, IdentitySplitsIntoIdentities) {
  KronSum ks = nearest_kron_sum(Matrix::Identity(9, 9), 3, 1);
  const auto &t = ks.terms[0];
  EXPECT_LT(rel(t.outer / t.outer(0, 0), Matrix::Identity(3, 3)), 1e-12);
  EXPECT_LT(rel(t.inner / t.inner(0, 0), Matrix::Identity(3, 3)), 1e-12);
}

TEST(KronSum, FullRankReconstructsAndTruncationIsMonotone) {
  Rng rng = stream_rng(11, {10});
  Matrix s = symmetrize(Matrix::Random(4, 4));
  EXPECT_LT((nearest_kron_sum(s, 2, 4).reconstruct() - s).norm(), 1e-10);

  Matrix big = random_spd(9, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (Index k = 1; k <= 9; ++k) {
    double err = (nearest_kron_sum(big, 3, k).reconstruct() - big).norm();
    EXPECT_LE(err, prev + 1e-12);
    prev = err;
  }
  EXPECT_LT(prev, 1e-10);
}

TEST(Helpers, SymmetrizeSpdAndSqrt) {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  EXPECT_EQ(symmetrize(m), (Matrix(2, 2) << 1, 1, 1, 1).finished());
  EXPECT_TRUE(is_spd(Matrix::Identity(3, 3)));
  EXPECT_FALSE(is_spd(m));
  EXPECT_FALSE(is_spd(-Matrix::Identity(2, 2)));

  Rng rng = stream_rng(11, {11});
  Matrix s = random_spd(4, rng);
  Matrix r = psd_sqrt(s);
  EXPECT_LT(rel(r * r, s), 1e-12);
  EXPECT_LT((r - r.transpose()).norm(), 1e-12);
  EXPECT_THROW(psd_sqrt(Matrix::Zero(2, 3)), DimensionError);
}
