#include "rsvm/rsvm_symmetric.hpp"

namespace rsvm {

Index default_symmetric_terms(Index p) { return p <= 12 ? p * p : p; }

SymmetricContractions symmetric_contractions(const KronSum &sigma, const Matrix &alpha) {
  const Index p = alpha.rows();
  SymmetricContractions out{Matrix::Zero(p, p), Matrix::Zero(p, p)};
  for (const auto &term : sigma.terms) {
    out.sigma_l.noalias() += (term.inner * alpha).trace() * term.outer.transpose();
    out.sigma_r.noalias() += (term.outer * alpha).trace() * term.inner.transpose();
  }
  return out;
}

Matrix update_precision_symmetric(const SymmetricState &state, const Hyperparameters &hyper) {
  const Matrix alpha = symmetrize(state.alpha);
  const auto con = symmetric_contractions(state.sigma_kron, alpha);
  const Matrix moment = 2.0 * state.x_hat * alpha * state.x_hat + con.sigma_r + con.sigma_l;
  return precision_from_moment(moment, hyper.symmetric_dof(alpha.rows()), hyper);
}

Matrix balance_symmetric(const Matrix &alpha, const Matrix &x_hat) {
  const double xnorm = x_hat.norm();
  if (xnorm < 1e-14)
    return alpha;
  return alpha * (spd_inverse(alpha).trace() / xnorm);
}

Estimate solve_symmetric(const ProblemInstance &inst, const Hyperparameters &hyper, Index s_terms) {
  if (inst.p() != inst.q())
    throw DimensionError("solve_symmetric: X must be square");
  const Index p = inst.p();
  if (s_terms == 0)
    s_terms = default_symmetric_terms(p);

  const SolverState init = init_state(inst, hyper);
  SymmetricState state{init.x_hat, Matrix::Identity(p, p), init.precisions.beta, {}, s_terms};
  std::vector<IterationRecord> history;
  bool converged = false;
  int iter = 0;
  while (iter < hyper.max_iter) {
    ++iter;
    const Matrix prev = state.x_hat;
    PrecisionState prec{state.alpha, state.alpha, state.beta};
    auto map = map_estimate(prec, inst, hyper.jitter);
    state.x_hat = symmetrize(map.x_hat);
    state.sigma_kron = nearest_kron_sum(map.sigma, p, s_terms);

    const double objective = neg_log_joint(state.x_hat, prec, inst);
    Matrix alpha = update_precision_symmetric(state, hyper);
    if (hyper.scale_rule == ScaleRule::Balanced)
      alpha = balance_symmetric(alpha, state.x_hat);

    const double residual_sq = (inst.y - inst.op.forward(vec(state.x_hat))).squaredNorm();
    state.beta = noise_precision_from(residual_sq, trace_a_sigma_at(inst.op, map.sigma), inst.m(), hyper);
    state.alpha = std::move(alpha);
    check_finite(state.x_hat, {state.alpha, state.alpha, state.beta}, iter, "rsvm-symmetric");

    const double change = relative_change(state.x_hat, prev);
    history.push_back({iter, change, objective, state.beta, effective_rank(state.x_hat), 0});
    if (change < hyper.tol) {
      converged = true;
      break;
    }
  }
  return Estimate{state.x_hat, effective_rank(state.x_hat), state.beta, iter, converged,
                  std::move(history)};
}

} // namespace rsvm
