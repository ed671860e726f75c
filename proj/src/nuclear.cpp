#include "rsvm/nuclear.hpp"

#include "rsvm/kron_ops.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace rsvm {

void NuclearConfig::validate() const {
  if (delta < 0.0)
    throw std::invalid_argument("nuclear: delta must be non-negative");
  if (!(lambda_low > 0.0) || lambda_high < 0.0)
    throw std::invalid_argument("nuclear: invalid lambda bracket");
  if (!(fista_tol > 0.0) || !(bisect_tol > 0.0))
    throw std::invalid_argument("nuclear: tolerances must be positive");
  if (max_fista_iter < 1 || max_bisect_iter < 1)
    throw std::invalid_argument("nuclear: iteration caps must be positive");
}

Matrix svt_prox(const Matrix &x, double tau) {
  if (tau < 0.0)
    throw std::invalid_argument("svt_prox: tau must be non-negative");
  if (tau == 0.0 || x.size() == 0)
    return x;
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector shrunk = (svd.singularValues().array() - tau).max(0.0);
  Index keep = 0;
  while (keep < shrunk.size() && shrunk(keep) > 0.0)
    ++keep;
  if (keep == 0)
    return Matrix::Zero(x.rows(), x.cols());
  return svd.matrixU().leftCols(keep) * shrunk.head(keep).asDiagonal() *
         svd.matrixV().leftCols(keep).transpose();
}

double operator_norm_sq(const MeasurementOperator &op) {
  if (op.is_completion())
    return op.m() > 0 ? 1.0 : 0.0;
  // power iteration on A^T A from a fixed start vector
  Vector v = Vector::Ones(op.n()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector w = op.adjoint(op.forward(v));
    const double next = w.norm();
    if (next == 0.0)
      return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-12 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

double lagrangian_objective(const ProblemInstance &inst, const Matrix &x, double lambda) {
  const double fit = 0.5 * (inst.y - inst.op.forward(vec(x))).squaredNorm();
  Eigen::BDCSVD<Matrix> svd(x);
  return fit + lambda * svd.singularValues().sum();
}

namespace {

LagrangianResult fista(const ProblemInstance &inst, double lambda, const NuclearConfig &cfg,
                       double lipschitz, const Matrix &start) {
  const Index p = inst.p(), q = inst.q();
  auto smooth = [&](const Matrix &x) { return 0.5 * (inst.y - inst.op.forward(vec(x))).squaredNorm(); };

  LagrangianResult res;
  Matrix x = start;
  Matrix yk = x;
  double t = 1.0;
  double f_best = lagrangian_objective(inst, x, lambda);
  double lip = std::max(lipschitz, 1e-12);
  res.objective_history.push_back(f_best);

  for (int k = 0; k < cfg.max_fista_iter; ++k) {
    res.iterations = k + 1;
    const Vector ay = inst.op.forward(vec(yk));
    const Matrix grad = unvec(inst.op.adjoint(ay - inst.y), p, q);
    const double f_y = 0.5 * (ay - inst.y).squaredNorm();

    Matrix z;
    for (;;) {
      z = svt_prox(yk - grad / lip, lambda / lip);
      const Matrix step = z - yk;
      const double bound = f_y + grad.cwiseProduct(step).sum() + 0.5 * lip * step.squaredNorm();
      if (smooth(z) <= bound * (1.0 + 1e-12) + 1e-300)
        break;
      lip *= 2.0;
    }

    const double f_z = lagrangian_objective(inst, z, lambda);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (f_z <= f_best) {
      const double change = (f_best - f_z) / std::max(std::abs(f_best), std::numeric_limits<double>::min());
      const Matrix x_prev = x;
      x = z;
      f_best = f_z;
      res.objective_history.push_back(f_best);
      yk = x + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
      if (change < cfg.fista_tol) {
        res.converged = true;
        break;
      }
    } else {
      // momentum overshoot: restart from the best iterate
      res.objective_history.push_back(f_best);
      yk = x;
      t = 1.0;
    }
  }
  res.x_hat = std::move(x);
  res.objective = f_best;
  return res;
}

} // namespace

LagrangianResult solve_lagrangian(const ProblemInstance &inst, double lambda, const NuclearConfig &cfg,
                                  const std::optional<Matrix> &warm_start) {
  cfg.validate();
  if (!(lambda > 0.0))
    throw std::invalid_argument("solve_lagrangian: lambda must be positive");
  const Matrix start = warm_start ? *warm_start : Matrix::Zero(inst.p(), inst.q());
  return fista(inst, lambda, cfg, operator_norm_sq(inst.op), start);
}

double delta_from_sigma(Index m, double sigma_n) {
  if (sigma_n < 0.0)
    throw std::invalid_argument("delta_from_sigma: sigma_n must be non-negative");
  const double md = static_cast<double>(m);
  return sigma_n * std::sqrt(md + std::sqrt(8.0 * md));
}

ConstrainedResult solve_constrained(const ProblemInstance &inst, double delta, const NuclearConfig &cfg) {
  cfg.validate();
  if (delta < 0.0)
    throw std::invalid_argument("solve_constrained: delta must be non-negative");
  const Index p = inst.p(), q = inst.q();
  const double lip = operator_norm_sq(inst.op);
  auto residual_of = [&](const Matrix &x) { return (inst.y - inst.op.forward(vec(x))).norm(); };
  auto finish = [&](Matrix x, double lambda, int iters, bool on_target, bool feasible) {
    ConstrainedResult out;
    out.residual = residual_of(x);
    out.lambda = lambda;
    out.feasible = feasible;
    out.estimate.effective_rank = effective_rank(x);
    out.estimate.iterations = iters;
    out.estimate.converged = on_target;
    out.estimate.x_hat = std::move(x);
    return out;
  };

  const double y_norm = inst.y.norm();
  double hi = cfg.lambda_high > 0.0 ? cfg.lambda_high : 2.0 * inst.op.adjoint(inst.y).norm();
  if (delta >= y_norm || hi == 0.0)
    return finish(Matrix::Zero(p, q), hi, 0, true, true);

  double lo = cfg.lambda_low;
  int total_iters = 0;
  if (delta == 0.0) {
    auto r = fista(inst, lo, cfg, lip, Matrix::Zero(p, q));
    total_iters += r.iterations;
    const double resid = residual_of(r.x_hat);
    return finish(std::move(r.x_hat), lo, total_iters, r.converged,
                  resid <= cfg.bisect_tol * std::max(y_norm, 1.0));
  }

  Matrix warm = Matrix::Zero(p, q);
  std::optional<std::pair<Matrix, double>> best_feasible;
  for (int it = 0; it < cfg.max_bisect_iter; ++it) {
    const double mid = std::sqrt(lo * hi);
    auto r = fista(inst, mid, cfg, lip, warm);
    total_iters += r.iterations;
    const double resid = residual_of(r.x_hat);
    if (std::abs(resid - delta) <= cfg.bisect_tol * delta)
      return finish(std::move(r.x_hat), mid, total_iters, true, true);
    warm = r.x_hat;
    if (resid > delta) {
      hi = mid;
    } else {
      lo = mid;
      best_feasible = std::make_pair(std::move(r.x_hat), mid);
    }
  }
  if (best_feasible)
    return finish(std::move(best_feasible->first), best_feasible->second, total_iters, false, true);

  auto r = fista(inst, cfg.lambda_low, cfg, lip, warm);
  total_iters += r.iterations;
  const bool feasible = residual_of(r.x_hat) <= delta * (1.0 + cfg.bisect_tol);
  return finish(std::move(r.x_hat), cfg.lambda_low, total_iters, false, feasible);
}

} // namespace rsvm
