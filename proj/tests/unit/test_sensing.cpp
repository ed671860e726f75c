#include "rsvm/kron_ops.hpp"
#include "rsvm/sensing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace rsvm;

TEST(StreamRng, SamePathSameStream) {
  Rng a = stream_rng(7, {1, 2, 3}), b = stream_rng(7, {1, 2, 3});
  for (int i = 0; i < 16; ++i)
    EXPECT_EQ(a(), b());
}

TEST(StreamRng, DistinctPathsDiffer) {
  Rng a = stream_rng(7, {1, 2}), b = stream_rng(7, {2, 1}), c = stream_rng(8, {1, 2});
  auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
}

TEST(Scenario, StringRoundTrip) {
  EXPECT_EQ(scenario_from_string(to_string(Scenario::Completion)), Scenario::Completion);
  EXPECT_EQ(scenario_from_string("reconstruction"), Scenario::Reconstruction);
  EXPECT_THROW(scenario_from_string("denoise"), std::invalid_argument);
}

TEST(CompletionOperator, FullSamplingIsVec) {
  Rng rng = stream_rng(1, {});
  auto op = completion_operator(3, 4, 12, rng);
  Matrix x = Matrix::Random(3, 4);
  EXPECT_EQ(op.forward(vec(x)), vec(x));
}

TEST(CompletionOperator, SingleEntry) {
  Rng rng = stream_rng(1, {1});
  auto op = completion_operator(3, 4, 1, rng);
  Matrix d = op.to_dense();
  EXPECT_EQ(d.rows(), 1);
  EXPECT_DOUBLE_EQ(d.sum(), 1.0);
  EXPECT_DOUBLE_EQ(d.maxCoeff(), 1.0);
}

TEST(CompletionOperator, DistinctSortedIndices) {
  Rng rng = stream_rng(1, {2});
  Index m = measurements_for_fraction(15, 30, 0.7);
  EXPECT_EQ(m, 315);
  auto op = completion_operator(15, 30, m, rng);
  const auto &idx = op.indices();
  EXPECT_EQ(idx.size(), 315u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::set<Index>(idx.begin(), idx.end()).size(), 315u);
  EXPECT_THROW(completion_operator(2, 2, 5, rng), std::invalid_argument);
}

TEST(MeasurementOperator, MatrixFreeMatchesDense) {
  Rng rng = stream_rng(1, {3});
  for (bool completion : {true, false}) {
    auto op = completion ? completion_operator(4, 5, 9, rng) : gaussian_operator(4, 5, 9, rng);
    Matrix d = op.to_dense();
    Vector v = Vector::Random(20), w = Vector::Random(9);
    EXPECT_LT((op.forward(v) - d * v).norm(), 1e-13);
    EXPECT_LT((op.adjoint(w) - d.transpose() * w).norm(), 1e-13);
    EXPECT_LT((op.gram() - d.transpose() * d).norm(), 1e-12);
    Matrix blk = Matrix::Random(20, 3);
    EXPECT_LT((op.apply(blk) - d * blk).norm(), 1e-12);
    std::vector<Index> cols{1, 7, 19};
    Matrix c = op.columns(cols);
    for (int k = 0; k < 3; ++k)
      EXPECT_EQ(c.col(k), d.col(cols[k]));
  }
}

TEST(MeasurementOperator, RejectsBadInput) {
  EXPECT_THROW(MeasurementOperator::completion(2, 2, {0, 4}), DimensionError);
  EXPECT_THROW(MeasurementOperator::completion(2, 2, {1, 1}), std::invalid_argument);
  EXPECT_THROW(MeasurementOperator::dense(2, 2, Matrix::Zero(3, 5)), DimensionError);
  auto op = MeasurementOperator::completion(2, 2, {0, 3});
  EXPECT_THROW(op.forward(Vector::Zero(3)), DimensionError);
  EXPECT_THROW(op.matrix(), std::logic_error);
}

TEST(GaussianOperator, ShapeUnitColumnsDeterminism) {
  Rng a = stream_rng(5, {1}), b = stream_rng(5, {1});
  auto op = gaussian_operator(15, 15, 157, a);
  EXPECT_EQ(op.matrix().rows(), 157);
  EXPECT_EQ(op.matrix().cols(), 225);
  for (Index j = 0; j < 225; ++j)
    EXPECT_NEAR(op.matrix().col(j).norm(), 1.0, 1e-12);
  EXPECT_EQ(gaussian_operator(15, 15, 157, b).matrix(), op.matrix());
}

TEST(LowRank, RankAndShape) {
  Rng rng = stream_rng(2, {});
  Matrix x = generate_low_rank(15, 30, 3, rng);
  Eigen::JacobiSVD<Matrix> svd(x);
  const Vector &s = svd.singularValues();
  EXPECT_GT(s(2), 1e-8 * s(0));
  EXPECT_LT(s(3), 1e-10 * s(0));

  Matrix full = generate_low_rank(4, 6, 4, rng);
  EXPECT_GT(Eigen::JacobiSVD<Matrix>(full).singularValues()(3), 1e-8);
}

TEST(LowRank, RankOneMinorsVanish) {
  Rng rng = stream_rng(2, {1});
  Matrix x = generate_low_rank(5, 6, 1, rng);
  for (Index i = 0; i + 1 < 5; ++i)
    for (Index j = 0; j + 1 < 6; ++j)
      EXPECT_NEAR(x(i, j) * x(i + 1, j + 1) - x(i, j + 1) * x(i + 1, j), 0.0, 1e-9);
}

TEST(LowRank, PsdTruth) {
  Rng rng = stream_rng(2, {2});
  Matrix x = generate_psd_low_rank(10, 2, rng);
  EXPECT_EQ(x, x.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  EXPECT_THROW(generate_psd_low_rank(3, 4, rng), std::invalid_argument);
}

TEST(NoiseCalibration, ArithmeticExamples) {
  double s = noise_sigma_for_snr(Scenario::Completion, 15, 30, 3, 315, 100.0);
  EXPECT_NEAR(s * s, 0.03, 1e-15);
  double t = noise_sigma_for_snr(Scenario::Reconstruction, 15, 15, 2, 157, 100.0);
  EXPECT_NEAR(t * t, 450.0 / 15700.0, 1e-15);
  EXPECT_LT(noise_sigma_for_snr(Scenario::Completion, 10, 10, 1, 80, 1e12), 1e-5);
  EXPECT_NEAR(snr_from_db(20.0), 100.0, 1e-12);
  EXPECT_THROW(noise_sigma_for_snr(Scenario::Completion, 2, 2, 1, 2, 0.0), std::invalid_argument);
}

TEST(Measure, NoiselessIsExact) {
  Rng rng = stream_rng(3, {});
  Matrix x = generate_low_rank(4, 5, 2, rng);
  auto op = completion_operator(4, 5, 20, rng);
  ProblemInstance inst = measure(op, x, 0.0, rng);
  EXPECT_EQ(inst.y, vec(x));
  ASSERT_TRUE(inst.ground_truth.has_value());
  EXPECT_EQ(*inst.ground_truth, x);
  EXPECT_THROW(measure(op, Matrix::Zero(5, 4), 0.0, rng), DimensionError);
}

TEST(Measure, EmpiricalSnrNearTarget) {
  // 20 dB configured; averaged over many draws the ratio should land close.
  double sig = 0.0, noise = 0.0;
  for (int t = 0; t < 200; ++t) {
    Rng rng = stream_rng(4, {static_cast<std::uint64_t>(t)});
    Matrix x = generate_low_rank(15, 30, 3, rng);
    auto op = completion_operator(15, 30, 315, rng);
    double sn = noise_sigma_for_snr(Scenario::Completion, 15, 30, 3, 315, 100.0);
    ProblemInstance inst = measure(op, x, sn, rng);
    Vector clean = op.forward(vec(x));
    sig += clean.squaredNorm();
    noise += (inst.y - clean).squaredNorm();
  }
  EXPECT_NEAR(10.0 * std::log10(sig / noise), 20.0, 1.0);
}

TEST(Fraction, FloorAndRange) {
  EXPECT_EQ(measurements_for_fraction(15, 15, 0.7), 157);
  EXPECT_EQ(measurements_for_fraction(10, 10, 1.0), 100);
  EXPECT_THROW(measurements_for_fraction(10, 10, 0.0), std::invalid_argument);
  EXPECT_THROW(measurements_for_fraction(10, 10, 1.5), std::invalid_argument);
}
