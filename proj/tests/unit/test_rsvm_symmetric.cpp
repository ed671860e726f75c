#include "rsvm/kron_ops.hpp"
#include "rsvm/rsvm_symmetric.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rsvm;

namespace {

Matrix random_spd(Index n, Rng &rng) {
  std::normal_distribution<double> g;
  Matrix b(n, n);
  for (Index i = 0; i < b.size(); ++i)
    b.data()[i] = g(rng);
  return b * b.transpose() / double(n) + 0.5 * Matrix::Identity(n, n);
}

double rel(const Matrix &a, const Matrix &b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

ProblemInstance psd_instance(Index p, Index r, double fraction, double snr_db, std::uint64_t seed) {
  Rng rng = stream_rng(seed, {});
  Matrix x = generate_psd_low_rank(p, r, rng);
  Index m = measurements_for_fraction(p, p, fraction);
  auto op = completion_operator(p, p, m, rng);
  double sn = snr_db > 0 ? noise_sigma_for_snr(Scenario::Completion, p, p, r, m, snr_from_db(snr_db)) : 0.0;
  return measure(std::move(op), x, sn, rng);
}

} // namespace

TEST(SymmetricTerms, Default) {
  EXPECT_EQ(default_symmetric_terms(3), 9);
  EXPECT_EQ(default_symmetric_terms(12), 144);
  EXPECT_EQ(default_symmetric_terms(13), 13);
}

TEST(SymmetricContractions, FullDecompositionMatchesDense) {
  Rng rng = stream_rng(41, {});
  for (Index p : {2, 3}) {
    Matrix sigma = random_spd(p * p, rng);
    Matrix alpha = random_spd(p, rng);
    KronSum ks = nearest_kron_sum(sigma, p, p * p);
    SymmetricContractions c = symmetric_contractions(ks, alpha);
    EXPECT_LT(rel(c.sigma_l, trace_contract_left(sigma, alpha)), 1e-8);
    EXPECT_LT(rel(c.sigma_r, trace_contract_right(sigma, alpha)), 1e-8);
  }
}

TEST(SymmetricUpdate, ZeroEverythingGivesNuOverEpsilon) {
  const Index p = 3;
  SymmetricState st;
  st.x_hat = Matrix::Zero(p, p);
  st.alpha = Matrix::Identity(p, p);
  st.sigma_kron.terms.push_back({Matrix::Zero(p, p), Matrix::Zero(p, p)});
  Hyperparameters h;
  h.scale_rule = ScaleRule::Balanced;
  h.epsilon_scale = 1e-3;
  EXPECT_LT(rel(update_precision_symmetric(st, h), Matrix::Identity(p, p) * 1e3), 1e-12);
}

TEST(SymmetricUpdate, IdentityCovariance) {
  // Sigma = I kron I: Sigma_L = Sigma_R = tr(alpha) I.
  Rng rng = stream_rng(42, {});
  const Index p = 3;
  SymmetricState st;
  st.x_hat = Matrix::Zero(p, p);
  st.alpha = random_spd(p, rng);
  st.sigma_kron = nearest_kron_sum(Matrix::Identity(p * p, p * p), p, 1);
  Hyperparameters h;
  h.scale_rule = ScaleRule::Balanced;
  double e = h.epsilon_scale;
  Matrix expect = ((2 * st.alpha.trace() + e) * Matrix::Identity(p, p)).inverse();
  EXPECT_LT(rel(update_precision_symmetric(st, h), expect), 1e-12);
}

TEST(SymmetricUpdate, MatchesDenseOracleAndIsSymmetric) {
  Rng rng = stream_rng(43, {});
  const Index p = 2;
  Matrix sigma = random_spd(p * p, rng);
  SymmetricState st;
  st.x_hat = symmetrize(Matrix::Random(p, p));
  st.alpha = random_spd(p, rng);
  st.alpha(0, 1) += 1e-13; // slight asymmetry must not leak through
  st.sigma_kron = nearest_kron_sum(sigma, p, p * p);
  Hyperparameters h;
  Matrix moment = 2 * st.x_hat * st.alpha * st.x_hat + trace_contract_right(sigma, st.alpha) +
                  trace_contract_left(sigma, st.alpha) + h.epsilon_scale * Matrix::Identity(p, p);
  Matrix expect = h.symmetric_dof(p) * moment.inverse();
  Matrix got = update_precision_symmetric(st, h);
  EXPECT_LT(rel(got, expect), 1e-8);
  EXPECT_EQ(got, got.transpose());
}

TEST(SymmetricBalance, SquaredTraceMatchesEnergy) {
  Rng rng = stream_rng(44, {});
  Matrix alpha = random_spd(4, rng) * 17.0;
  Matrix x = symmetrize(Matrix::Random(4, 4));
  Matrix b = balance_symmetric(alpha, x);
  double t = b.inverse().trace();
  EXPECT_NEAR(t * t, x.squaredNorm(), 1e-10 * x.squaredNorm());
}

TEST(SolveSymmetric, FullyObservedNoiselessRankOne) {
  ProblemInstance inst = psd_instance(8, 1, 1.0, 0.0, 45);
  Estimate e = solve_symmetric(inst, {});
  const Matrix &x = *inst.ground_truth;
  EXPECT_LT((e.x_hat - x).squaredNorm() / x.squaredNorm(), 1e-6);
  EXPECT_LT((e.x_hat - e.x_hat.transpose()).norm(), 1e-10 * e.x_hat.norm());
}

TEST(SolveSymmetric, NoisyPsdRankTwo) {
  ProblemInstance inst = psd_instance(10, 2, 0.7, 20.0, 46);
  Estimate e = solve_symmetric(inst, {});
  const Matrix &x = *inst.ground_truth;
  double db = 10 * std::log10((e.x_hat - x).squaredNorm() / x.squaredNorm());
  EXPECT_LT(db, -15.0);
}

TEST(SolveSymmetric, TruncatedTermsStillRun) {
  ProblemInstance inst = psd_instance(6, 1, 0.8, 20.0, 47);
  Hyperparameters h;
  h.max_iter = 20;
  Estimate e = solve_symmetric(inst, h, 3);
  EXPECT_TRUE(e.x_hat.allFinite());
  EXPECT_GT(e.beta_hat, 0.0);
}

TEST(SolveSymmetric, RejectsRectangular) {
  Rng rng = stream_rng(48, {});
  auto op = completion_operator(3, 4, 6, rng);
  ProblemInstance inst{op, Vector::Ones(6), std::nullopt, 0.0};
  EXPECT_THROW(solve_symmetric(inst, {}), DimensionError);
}
