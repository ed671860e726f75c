#include "rsvm/rsvm_core.hpp"

#include "rsvm/kron_ops.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rsvm {

ScaleRule scale_rule_from_string(const std::string &name) {
  if (name == "wishart")
    return ScaleRule::Wishart;
  if (name == "balanced")
    return ScaleRule::Balanced;
  throw std::invalid_argument("unknown scale rule '" + name + "' (expected wishart or balanced)");
}

const char *to_string(ScaleRule rule) { return rule == ScaleRule::Wishart ? "wishart" : "balanced"; }

void Hyperparameters::validate() const {
  if (!(epsilon_scale > 0.0))
    throw std::invalid_argument("hyperparameters: epsilon_scale must be positive");
  if (c < 0.0 || d < 0.0)
    throw std::invalid_argument("hyperparameters: c and d must be non-negative");
  if (!(nu_eff > 0.0))
    throw std::invalid_argument("hyperparameters: nu_eff must be positive");
  if (!(tol > 0.0))
    throw std::invalid_argument("hyperparameters: tol must be positive");
  if (max_iter < 1)
    throw std::invalid_argument("hyperparameters: max_iter must be at least 1");
  if (jitter < 0.0)
    throw std::invalid_argument("hyperparameters: jitter must be non-negative");
}

SolverState init_state(const ProblemInstance &inst, const Hyperparameters &hyper) {
  hyper.validate();
  SolverState state;
  state.x_hat = Matrix::Zero(inst.p(), inst.q());
  state.precisions.alpha_l = Matrix::Identity(inst.p(), inst.p());
  state.precisions.alpha_r = Matrix::Identity(inst.q(), inst.q());
  const double energy = inst.y.squaredNorm();
  state.precisions.beta = energy > 0.0 ? 10.0 * static_cast<double>(inst.m()) / energy : 1.0;
  return state;
}

MapResult map_estimate(const PrecisionState &prec, const ProblemInstance &inst, double jitter) {
  MapResult out;
  out.sigma = posterior_covariance(prec.alpha_l, prec.alpha_r, inst.op, prec.beta,
                                   CovariancePath::Auto, jitter);
  const Vector rhs = prec.beta * inst.op.adjoint(inst.y);
  out.x_hat = unvec(out.sigma * rhs, inst.p(), inst.q());
  return out;
}

Matrix precision_from_moment(const Matrix &moment, double dof, const Hyperparameters &hyper) {
  Matrix reg = symmetrize(moment);
  reg.diagonal().array() += hyper.epsilon_scale;
  return dof * spd_inverse(reg, hyper.jitter);
}

Matrix update_left_precision(const SolverState &state, const Hyperparameters &hyper) {
  const Matrix &x = state.x_hat;
  const Matrix &ar = state.precisions.alpha_r;
  const Matrix moment = trace_contract_right(state.sigma, ar) + x * ar * x.transpose();
  return precision_from_moment(moment, hyper.left_dof(x.cols()), hyper);
}

Matrix update_right_precision(const SolverState &state, const Hyperparameters &hyper) {
  const Matrix &x = state.x_hat;
  const Matrix &al = state.precisions.alpha_l;
  const Matrix moment = trace_contract_left(state.sigma, al) + x.transpose() * al * x;
  return precision_from_moment(moment, hyper.right_dof(x.rows()), hyper);
}

PrecisionState update_precisions(const SolverState &state, const Hyperparameters &hyper) {
  PrecisionState next = state.precisions;
  next.alpha_l = update_left_precision(state, hyper);
  SolverState mid = state;
  mid.precisions.alpha_l = next.alpha_l;
  next.alpha_r = update_right_precision(mid, hyper);
  return next;
}

double noise_precision_from(double residual_sq, double trace_term, Index m, const Hyperparameters &hyper) {
  const double denom = residual_sq + trace_term + 2.0 * hyper.d;
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw SolverError("noise precision update: non-positive denominator " + std::to_string(denom));
  return (static_cast<double>(m) + 2.0 * hyper.c) / denom;
}

double trace_a_sigma_at(const MeasurementOperator &op, const Matrix &sigma) {
  if (op.is_completion()) {
    double t = 0.0;
    for (Index idx : op.indices())
      t += sigma(idx, idx);
    return t;
  }
  const Matrix &a = op.matrix();
  return (a * sigma).cwiseProduct(a).sum();
}

double update_noise_precision(const SolverState &state, const ProblemInstance &inst,
                              const Hyperparameters &hyper) {
  const double residual_sq = (inst.y - inst.op.forward(vec(state.x_hat))).squaredNorm();
  return noise_precision_from(residual_sq, trace_a_sigma_at(inst.op, state.sigma), inst.m(), hyper);
}

PrecisionState balance_precisions(const PrecisionState &prec, const Matrix &x_hat) {
  const double xnorm = x_hat.norm();
  if (xnorm < 1e-14)
    return prec;
  const double tr_l = spd_inverse(prec.alpha_l).trace();
  const double tr_r = spd_inverse(prec.alpha_r).trace();
  const double g = std::sqrt(tr_l * tr_r) / xnorm;
  const double h = std::sqrt(prec.alpha_r.norm() / prec.alpha_l.norm());
  PrecisionState out = prec;
  out.alpha_l *= g * h;
  out.alpha_r *= g / h;
  return out;
}

PrecisionState balance_norms(const PrecisionState &prec) {
  const double h = std::sqrt(prec.alpha_r.norm() / prec.alpha_l.norm());
  PrecisionState out = prec;
  out.alpha_l *= h;
  out.alpha_r /= h;
  return out;
}

PriorCovariance to_covariance(const PrecisionState &prec) {
  return {spd_inverse(prec.alpha_l), spd_inverse(prec.alpha_r)};
}

PrecisionState to_precision(const PriorCovariance &cov, double beta) {
  return {spd_inverse(cov.left), spd_inverse(cov.right), beta};
}

namespace {

// ||Gamma^{-1}||_F from the eigenvalues of Gamma.
double inverse_norm(const Matrix &gamma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(gamma), Eigen::EigenvaluesOnly);
  const Vector &ev = es.eigenvalues();
  if (es.info() != Eigen::Success || !(ev.minCoeff() > 0.0))
    throw SolverError("balance: prior covariance is not positive definite");
  return ev.cwiseInverse().norm();
}

} // namespace

PriorCovariance balance_covariances(const PriorCovariance &cov, const Matrix &x_hat, ScaleRule rule) {
  // alpha_l * h  <=>  Gamma_l / h
  const double h = std::sqrt(inverse_norm(cov.right) / inverse_norm(cov.left));
  PriorCovariance out{cov.left / h, cov.right * h};
  const double xnorm = x_hat.norm();
  if (rule == ScaleRule::Balanced && xnorm >= 1e-14) {
    const double g = std::sqrt(out.left.trace() * out.right.trace()) / xnorm;
    out.left /= g;
    out.right /= g;
  }
  return out;
}

WhitenedPosterior::WhitenedPosterior(const PriorCovariance &cov, const ProblemInstance &inst,
                                     double beta)
    : p_(inst.p()), q_(inst.q()) {
  if (cov.left.rows() != p_ || cov.right.rows() != q_)
    throw DimensionError("WhitenedPosterior: covariance sizes do not match the instance");
  if (!(beta > 0.0))
    throw std::invalid_argument("WhitenedPosterior: beta must be positive");
  const Index n = p_ * q_, m = inst.m();
  root_l_ = psd_sqrt(cov.left);
  root_r_ = psd_sqrt(cov.right);

  // F = A W, row by row: a measurement of entry (i, j) becomes Wr(j,:) kron Wl(i,:).
  Matrix f(m, n);
  if (inst.op.is_completion()) {
    const auto &idx = inst.op.indices();
    for (Index r = 0; r < m; ++r) {
      const Index i = idx[r] % p_, j = idx[r] / p_;
      for (Index b = 0; b < q_; ++b)
        f.row(r).segment(b * p_, p_) = root_r_(j, b) * root_l_.row(i);
    }
  } else {
    const Matrix &a = inst.op.matrix();
    for (Index r = 0; r < m; ++r) {
      const Matrix ar = a.row(r).reshaped(p_, q_);
      f.row(r) = (root_l_ * ar * root_r_).reshaped().transpose();
    }
  }

  if (2 * m < n) {
    // B^{-1} = I - F^T (beta^{-1} I + F F^T)^{-1} F = I - M^T M
    Matrix k = Matrix::Identity(m, m) / beta;
    k.selfadjointView<Eigen::Lower>().rankUpdate(f);
    Eigen::LLT<Matrix> llt(k.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
      throw FactorizationError("WhitenedPosterior: Woodbury system not positive definite");
    factor_ = llt.matrixL().solve(f);
    complement_ = true;
    trace_asa_ = factor_.squaredNorm() / beta;
  } else {
    Matrix b = Matrix::Identity(n, n);
    b.selfadjointView<Eigen::Lower>().rankUpdate(f.transpose(), beta);
    Eigen::LLT<Matrix> llt(b.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
      throw FactorizationError("WhitenedPosterior: whitened system not positive definite");
    factor_ = llt.matrixL().solve(Matrix::Identity(n, n));
    complement_ = false;
    // tr(F B^{-1} F^T) = (n - tr B^{-1}) / beta
    trace_asa_ = (static_cast<double>(n) - factor_.squaredNorm()) / beta;
  }

  const Vector u = beta * (f.transpose() * inst.y);
  Vector z = factor_.transpose() * (factor_ * u);
  if (complement_)
    z = u - z;
  z_ = unvec(z, p_, q_);
  x_hat_ = root_l_ * z_ * root_r_;
}

Matrix WhitenedPosterior::right_contraction() const {
  // sum over column blocks a of B^{-1}(a, a)
  Matrix c = Matrix::Zero(p_, p_);
  for (Index a = 0; a < q_; ++a) {
    const auto blk = factor_.middleCols(a * p_, p_);
    c.noalias() += blk.transpose() * blk;
  }
  if (complement_)
    c = static_cast<double>(q_) * Matrix::Identity(p_, p_) - c;
  return root_l_ * c * root_l_;
}

Matrix WhitenedPosterior::left_contraction() const {
  // traces of the p x p blocks of B^{-1}; the reshape stacks the rows of M as p x q slices
  const auto slices = factor_.reshaped(factor_.rows() * p_, q_);
  Matrix c = slices.transpose() * slices;
  if (complement_)
    c = static_cast<double>(p_) * Matrix::Identity(q_, q_) - c;
  return root_r_ * c * root_r_;
}

Matrix WhitenedPosterior::left_moment() const {
  return right_contraction() + root_l_ * (z_ * z_.transpose()) * root_l_;
}

Matrix WhitenedPosterior::right_moment() const {
  return left_contraction() + root_r_ * (z_.transpose() * z_) * root_r_;
}

Matrix WhitenedPosterior::inverse() const {
  Matrix b = factor_.transpose() * factor_;
  if (complement_)
    b = Matrix::Identity(b.rows(), b.cols()) - b;
  return b;
}

Matrix WhitenedPosterior::covariance() const {
  const Matrix w = kron(root_r_, root_l_);
  return symmetrize(w * inverse() * w);
}

double neg_log_joint(const Matrix &x_hat, const PrecisionState &prec, const ProblemInstance &inst) {
  const double residual_sq = (inst.y - inst.op.forward(vec(x_hat))).squaredNorm();
  const double prior = (prec.alpha_l * x_hat * prec.alpha_r).cwiseProduct(x_hat).sum();
  return 0.5 * prec.beta * residual_sq + 0.5 * prior;
}

Index effective_rank(const Matrix &x) {
  if (x.size() == 0)
    return 0;
  Eigen::JacobiSVD<Matrix> svd(x);
  const Vector &s = svd.singularValues();
  if (!(s(0) > 0.0))
    return 0;
  return (s.array() > 1e-3 * s(0)).count();
}

double relative_change(const Matrix &cur, const Matrix &prev) {
  return (cur - prev).norm() / std::max(prev.norm(), 1e-12);
}

void check_finite(const Matrix &x_hat, const PrecisionState &prec, int iter, const char *who) {
  if (x_hat.allFinite() && prec.alpha_l.allFinite() && prec.alpha_r.allFinite() &&
      std::isfinite(prec.beta) && prec.beta > 0.0)
    return;
  std::ostringstream msg;
  msg << who << ": non-finite state at iteration " << iter << " (||X||_F=" << x_hat.norm()
      << ", ||alpha_l||_F=" << prec.alpha_l.norm() << ", ||alpha_r||_F=" << prec.alpha_r.norm()
      << ", beta=" << prec.beta << ")";
  throw SolverError(msg.str());
}

namespace {

Matrix covariance_from_moment(const Matrix &moment, double dof, const Hyperparameters &hyper) {
  Matrix reg = symmetrize(moment);
  reg.diagonal().array() += hyper.epsilon_scale;
  return reg / dof;
}

void check_finite(const Matrix &x_hat, const PriorCovariance &cov, double beta, int iter) {
  if (x_hat.allFinite() && cov.left.allFinite() && cov.right.allFinite() && std::isfinite(beta) &&
      beta > 0.0)
    return;
  std::ostringstream msg;
  msg << "rsvm: non-finite state at iteration " << iter << " (||X||_F=" << x_hat.norm()
      << ", tr Gl=" << cov.left.trace() << ", tr Gr=" << cov.right.trace() << ", beta=" << beta
      << ")";
  throw SolverError(msg.str());
}

} // namespace

Estimate solve(const ProblemInstance &inst, const Hyperparameters &hyper,
               const IterationObserver &observer) {
  const SolverState init = init_state(inst, hyper);
  const Index p = inst.p(), q = inst.q();
  PriorCovariance cov{Matrix::Identity(p, p), Matrix::Identity(q, q)};
  double beta = init.precisions.beta;
  Matrix x_hat = init.x_hat;
  std::vector<IterationRecord> history;
  bool converged = false;
  int iter = 0;
  while (iter < hyper.max_iter) {
    ++iter;
    const Matrix prev = x_hat;

    const WhitenedPosterior first(cov, inst, beta);
    const double residual0 = (inst.y - inst.op.forward(vec(first.x_hat()))).squaredNorm();
    const double objective = 0.5 * beta * residual0 + 0.5 * first.prior_energy();
    cov.left = covariance_from_moment(first.left_moment(), hyper.left_dof(q), hyper);

    const WhitenedPosterior second(cov, inst, beta);
    cov.right = covariance_from_moment(second.right_moment(), hyper.right_dof(p), hyper);
    x_hat = second.x_hat();

    cov = balance_covariances(cov, x_hat, hyper.scale_rule);
    const double residual = (inst.y - inst.op.forward(vec(x_hat))).squaredNorm();
    beta = noise_precision_from(residual, second.trace_a_sigma_at(), inst.m(), hyper);
    check_finite(x_hat, cov, beta, iter);

    const double change = relative_change(x_hat, prev);
    history.push_back({iter, change, objective, beta, effective_rank(x_hat), 0});
    if (observer)
      observer(IterationView{iter, x_hat, cov, beta});
    if (change < hyper.tol) {
      converged = true;
      break;
    }
  }
  return Estimate{x_hat, effective_rank(x_hat), beta, iter, converged, std::move(history)};
}

void write_trace_csv(const std::vector<IterationRecord> &history, const std::filesystem::path &path,
                     bool with_sweeps) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open trace file '" + path.string() + "'");
  out << "iter,rel_change,neg_log_joint,beta,effective_rank";
  if (with_sweeps)
    out << ",sweeps";
  out << '\n';
  char buf[256];
  for (const auto &rec : history) {
    std::snprintf(buf, sizeof buf, "%d,%.6g,%.6g,%.6g,%lld", rec.iter, rec.rel_change,
                  rec.neg_log_joint, rec.beta, static_cast<long long>(rec.effective_rank));
    out << buf;
    if (with_sweeps)
      out << ',' << rec.sweeps;
    out << '\n';
  }
}

} // namespace rsvm
