#pragma once

#include "rsvm/sensing.hpp"
#include "rsvm/types.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rsvm {

/// How the overall scale of the precisions is fixed.
///
/// Wishart: the update multipliers are the Wishart modes nu_eff * q (left) and
/// nu_eff * p (right), so the scale follows the evidence; balancing only
/// equalizes ||aL||_F and ||aR||_F.
/// Balanced: multiplier nu_eff on both sides, and balancing additionally
/// enforces tr(aL^-1) tr(aR^-1) = ||X||_F^2.
enum class ScaleRule { Wishart, Balanced };

/// "wishart" / "balanced"; throws std::invalid_argument otherwise.
ScaleRule scale_rule_from_string(const std::string &name);
const char *to_string(ScaleRule rule);

/// Prior and stopping parameters shared by all RSVM variants.
/// The Wishart scale matrices are epsilon_scale * I.
struct Hyperparameters {
  double epsilon_scale = 1e-6;
  double c = 1e-6;
  double d = 1e-6;
  double nu_eff = 1.0;
  double tol = 1e-6;
  int max_iter = 200;
  double jitter = 0.0;
  ScaleRule scale_rule = ScaleRule::Wishart;

  void validate() const;
  double left_dof(Index q) const { return scale_rule == ScaleRule::Wishart ? nu_eff * q : nu_eff; }
  double right_dof(Index p) const { return scale_rule == ScaleRule::Wishart ? nu_eff * p : nu_eff; }
  /// Single shared precision: the moment counts X alpha X twice.
  double symmetric_dof(Index p) const {
    return scale_rule == ScaleRule::Wishart ? 2.0 * nu_eff * p : nu_eff;
  }
};

struct PrecisionState {
  Matrix alpha_l; // p x p
  Matrix alpha_r; // q x q
  double beta = 1.0;
};

struct IterationRecord {
  int iter = 0;
  double rel_change = 0.0;
  double neg_log_joint = 0.0;
  double beta = 0.0;
  Index effective_rank = 0;
  int sweeps = 0; // inner block sweeps; zero for the full solver
};

struct SolverState {
  Matrix x_hat;
  Matrix sigma; // pq x pq posterior covariance
  PrecisionState precisions;
  int iter = 0;
  std::vector<IterationRecord> history;
};

struct Estimate {
  Matrix x_hat;
  Index effective_rank = 0;
  double beta_hat = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
};

/// Identity precisions, zero estimate, beta0 = 10 m / ||y||^2 (1 if y = 0).
SolverState init_state(const ProblemInstance &inst, const Hyperparameters &hyper);

struct MapResult {
  Matrix x_hat;
  Matrix sigma;
};

/// vec(x) = beta Sigma A^T y with Sigma = ((aR kron aL) + beta A^T A)^{-1}.
MapResult map_estimate(const PrecisionState &prec, const ProblemInstance &inst, double jitter = 0.0);

/// dof (moment + eps I)^{-1}, symmetrized.
Matrix precision_from_moment(const Matrix &moment, double dof, const Hyperparameters &hyper);

/// alpha_l from Sigma_R + X aR X^T at the state's alpha_r.
Matrix update_left_precision(const SolverState &state, const Hyperparameters &hyper);
/// alpha_r from Sigma_L + X^T aL X at the state's alpha_l.
Matrix update_right_precision(const SolverState &state, const Hyperparameters &hyper);

/// Gauss-Seidel precision update from a single posterior: alpha_l with the
/// old alpha_r, then alpha_r with the new alpha_l. beta is carried through.
PrecisionState update_precisions(const SolverState &state, const Hyperparameters &hyper);

/// (m + 2c) / (||y - A x||^2 + tr(A Sigma A^T) + 2d)
double noise_precision_from(double residual_sq, double trace_term, Index m, const Hyperparameters &hyper);
double update_noise_precision(const SolverState &state, const ProblemInstance &inst,
                              const Hyperparameters &hyper);

/// tr(A Sigma A^T) for a full covariance.
double trace_a_sigma_at(const MeasurementOperator &op, const Matrix &sigma);

/// Rescales alpha_l by g h and alpha_r by g / h so that
/// tr(aL^-1) tr(aR^-1) = ||X||_F^2 and ||aL||_F = ||aR||_F.
/// Returned unchanged when ||X||_F < 1e-14.
PrecisionState balance_precisions(const PrecisionState &prec, const Matrix &x_hat);

/// The h half of balance_precisions: ||aL||_F = ||aR||_F, product unchanged.
PrecisionState balance_norms(const PrecisionState &prec);

/// Prior covariances Gamma = alpha^{-1}. The solvers iterate on these: pruned
/// directions push alpha towards condition numbers near 1e15, while Gamma
/// stays representable to full relative accuracy where it matters.
struct PriorCovariance {
  Matrix left;  // p x p
  Matrix right; // q x q
};

PriorCovariance to_covariance(const PrecisionState &prec);
PrecisionState to_precision(const PriorCovariance &cov, double beta);

/// balance_precisions / balance_norms expressed on covariances.
PriorCovariance balance_covariances(const PriorCovariance &cov, const Matrix &x_hat, ScaleRule rule);

/// Fixed-precision posterior in whitened coordinates. With
/// W = Gr^{1/2} kron Gl^{1/2} and F = A W,
///   B = I + beta F^T F,  z = beta B^{-1} F^T y,  vec(X) = W z,
///   Sigma = W B^{-1} W.
/// B >= I, so nothing here depends on the conditioning of the precisions.
/// B^{-1} is stored as M^T M (Cholesky) or I - M^T M (Woodbury, m < pq/2).
class WhitenedPosterior {
public:
  WhitenedPosterior(const PriorCovariance &cov, const ProblemInstance &inst, double beta);

  const Matrix &x_hat() const { return x_hat_; }
  /// tr(aL X aR X^T) = ||z||^2
  double prior_energy() const { return z_.squaredNorm(); }
  /// tr(A Sigma A^T)
  double trace_a_sigma_at() const { return trace_asa_; }

  /// Sigma_R at alpha_r = Gr^{-1}, and Sigma_R + X aR X^T.
  Matrix right_contraction() const;
  Matrix left_moment() const;
  /// Sigma_L at alpha_l = Gl^{-1}, and Sigma_L + X^T aL X.
  Matrix left_contraction() const;
  Matrix right_moment() const;

  /// Dense Sigma; O((pq)^3), for checks only.
  Matrix covariance() const;

private:
  Matrix inverse() const; // B^{-1}
  Index p_, q_;
  Matrix root_l_, root_r_; // Gl^{1/2}, Gr^{1/2}
  Matrix factor_;          // M
  bool complement_ = false;
  Matrix z_, x_hat_;
  double trace_asa_ = 0.0;
};

/// What an observer sees after each completed iteration.
struct IterationView {
  int iter;
  const Matrix &x_hat;
  const PriorCovariance &cov; // after balancing
  double beta;
};
using IterationObserver = std::function<void(const IterationView &)>;

/// beta/2 ||y - A vec(X)||^2 + 1/2 tr(aL X aR X^T)
double neg_log_joint(const Matrix &x_hat, const PrecisionState &prec, const ProblemInstance &inst);

/// Number of singular values above 1e-3 times the largest.
Index effective_rank(const Matrix &x);

/// ||cur - prev||_F / max(||prev||_F, 1e-12)
double relative_change(const Matrix &cur, const Matrix &prev);

/// Throws SolverError with a state summary if anything is non-finite.
void check_finite(const Matrix &x_hat, const PrecisionState &prec, int iter, const char *who);

/// Each iteration: MAP, alpha_l update, MAP again, alpha_r update, balancing,
/// beta update; stops when the relative change of X falls below tol.
Estimate solve(const ProblemInstance &inst, const Hyperparameters &hyper,
               const IterationObserver &observer = {});

/// iter,rel_change,neg_log_joint,beta,effective_rank[,sweeps]
void write_trace_csv(const std::vector<IterationRecord> &history, const std::filesystem::path &path,
                     bool with_sweeps = false);

} // namespace rsvm
