#include "rsvm/rsvm_accel.hpp"

#include "rsvm/kron_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rsvm {

namespace {

std::vector<Index> group_sizes(Index total, Index groups) {
  std::vector<Index> sizes(static_cast<std::size_t>(groups), total / groups);
  for (Index g = 0; g < total % groups; ++g)
    ++sizes[static_cast<std::size_t>(g)];
  return sizes;
}

std::vector<Index> group_starts(const std::vector<Index> &sizes) {
  std::vector<Index> starts(sizes.size() + 1, 0);
  std::partial_sum(sizes.begin(), sizes.end(), starts.begin() + 1);
  return starts;
}

// alpha_{Omega,Omega}(a,b) = alpha_r(j_a, j_b) alpha_l(i_a, i_b)
Matrix restricted_precision(const std::vector<Index> &block, const PrecisionState &prec, Index p) {
  const Index n = static_cast<Index>(block.size());
  Matrix out(n, n);
  for (Index b = 0; b < n; ++b) {
    const Index ib = block[static_cast<std::size_t>(b)] % p, jb = block[static_cast<std::size_t>(b)] / p;
    for (Index a = 0; a < n; ++a) {
      const Index ia = block[static_cast<std::size_t>(a)] % p, ja = block[static_cast<std::size_t>(a)] / p;
      out(a, b) = prec.alpha_r(ja, jb) * prec.alpha_l(ia, ib);
    }
  }
  return out;
}

Matrix inverse_root(const Matrix &a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
    throw FactorizationError("block precision is not positive definite");
  const Vector r = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

// alpha_{Omega,Omega}^{-1/2}. Tiles I x J listed column by column factor as
// alpha_r(J,J) kron alpha_l(I,I), so only the two small roots are needed;
// anything else falls back to the dense root.
Matrix block_inverse_root(const std::vector<Index> &block, const PrecisionState &prec, Index p) {
  std::vector<Index> rows, cols;
  for (Index v : block) {
    rows.push_back(v % p);
    cols.push_back(v / p);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  bool tile = rows.size() * cols.size() == block.size();
  for (std::size_t k = 0; tile && k < block.size(); ++k)
    tile = block[k] == rows[k % rows.size()] + cols[k / rows.size()] * p;
  if (!tile)
    return inverse_root(restricted_precision(block, prec, p));
  const Matrix al = prec.alpha_l(rows, rows);
  const Matrix ar = prec.alpha_r(cols, cols);
  return kron(inverse_root(ar), inverse_root(al));
}

Vector gather(const Vector &x, const std::vector<Index> &idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out(static_cast<Index>(k)) = x(idx[k]);
  return out;
}

} // namespace

BlockPartition partition_blocks(Index p, Index q, BlockStrategy strategy, Index n_blocks) {
  if (strategy == BlockStrategy::Grid)
    throw std::invalid_argument("partition_blocks: use partition_grid for grid partitions");
  const Index extent = strategy == BlockStrategy::Columns ? q : p;
  if (n_blocks < 1 || n_blocks > extent)
    throw std::invalid_argument("partition_blocks: n_blocks must lie in [1, " +
                                std::to_string(extent) + "], got " + std::to_string(n_blocks));
  BlockPartition part;
  part.strategy = strategy;
  part.p = p;
  part.q = q;
  const auto starts = group_starts(group_sizes(extent, n_blocks));
  for (Index g = 0; g < n_blocks; ++g) {
    std::vector<Index> block;
    for (Index j = 0; j < q; ++j)
      for (Index i = 0; i < p; ++i) {
        const Index key = strategy == BlockStrategy::Columns ? j : i;
        if (key >= starts[static_cast<std::size_t>(g)] && key < starts[static_cast<std::size_t>(g) + 1])
          block.push_back(i + j * p);
      }
    part.blocks.push_back(std::move(block));
  }
  return part;
}

BlockPartition partition_grid(Index p, Index q, Index s, Index t) {
  if (s < 1 || s > p || t < 1 || t > q)
    throw std::invalid_argument("partition_grid: need 1 <= s <= p and 1 <= t <= q");
  BlockPartition part;
  part.strategy = BlockStrategy::Grid;
  part.p = p;
  part.q = q;
  const auto rs = group_starts(group_sizes(p, s));
  const auto cs = group_starts(group_sizes(q, t));
  for (Index bc = 0; bc < t; ++bc)
    for (Index br = 0; br < s; ++br) {
      std::vector<Index> block;
      for (Index j = cs[static_cast<std::size_t>(bc)]; j < cs[static_cast<std::size_t>(bc) + 1]; ++j)
        for (Index i = rs[static_cast<std::size_t>(br)]; i < rs[static_cast<std::size_t>(br) + 1]; ++i)
          block.push_back(i + j * p);
      part.blocks.push_back(std::move(block));
    }
  return part;
}

Matrix block_trace_contract_right(const BlockPartition &part, const BlockCovariance &cov,
                                  const Matrix &alpha_r) {
  const Index p = part.p;
  Matrix out = Matrix::Zero(p, p);
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    const auto &idx = part.blocks[b];
    const Matrix &s = cov.blocks[b];
    for (std::size_t v = 0; v < idx.size(); ++v) {
      const Index iv = idx[v] % p, jv = idx[v] / p;
      for (std::size_t u = 0; u < idx.size(); ++u) {
        const Index iu = idx[u] % p, ju = idx[u] / p;
        out(iv, iu) += alpha_r(jv, ju) * s(static_cast<Index>(u), static_cast<Index>(v));
      }
    }
  }
  return out;
}

Matrix block_trace_contract_left(const BlockPartition &part, const BlockCovariance &cov,
                                 const Matrix &alpha_l) {
  const Index p = part.p;
  Matrix out = Matrix::Zero(part.q, part.q);
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    const auto &idx = part.blocks[b];
    const Matrix &s = cov.blocks[b];
    for (std::size_t v = 0; v < idx.size(); ++v) {
      const Index iv = idx[v] % p, jv = idx[v] / p;
      for (std::size_t u = 0; u < idx.size(); ++u) {
        const Index iu = idx[u] % p, ju = idx[u] / p;
        out(jv, ju) += alpha_l(iv, iu) * s(static_cast<Index>(u), static_cast<Index>(v));
      }
    }
  }
  return out;
}

Matrix scatter_block_covariance(const BlockPartition &part, const BlockCovariance &cov) {
  const Index n = part.p * part.q;
  Matrix out = Matrix::Zero(n, n);
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    const auto &idx = part.blocks[b];
    for (std::size_t v = 0; v < idx.size(); ++v)
      for (std::size_t u = 0; u < idx.size(); ++u)
        out(idx[u], idx[v]) = cov.blocks[b](static_cast<Index>(u), static_cast<Index>(v));
  }
  return out;
}

BlockDescent::BlockDescent(const ProblemInstance &inst, BlockPartition part)
    : inst_(inst), part_(std::move(part)) {
  if (part_.p != inst.p() || part_.q != inst.q())
    throw DimensionError("BlockDescent: partition shape does not match instance");
  for (const auto &block : part_.blocks) {
    Matrix a = inst.op.columns(block);
    gram_blocks_.push_back(a.transpose() * a);
    a_blocks_.push_back(std::move(a));
  }
}

void BlockDescent::set_precisions(const PrecisionState &prec, double jitter) {
  prec_ = prec;
  factors_.clear();
  roots_.clear();
  for (std::size_t b = 0; b < part_.blocks.size(); ++b) {
    // W (alpha_OO + beta G) W = I + beta W G W with W = alpha_OO^{-1/2}
    Matrix w = block_inverse_root(part_.blocks[b], prec, part_.p);
    Matrix h = prec.beta * (w * gram_blocks_[b] * w);
    h.diagonal().array() += 1.0;
    factors_.push_back(spd_factor(symmetrize(h), jitter));
    roots_.push_back(std::move(w));
  }
}

Vector BlockDescent::update_block(Vector &x, std::size_t i) const {
  const auto &idx = part_.blocks[i];
  const Index p = part_.p, q = part_.q;
  const Vector x_blk = gather(x, idx);

  // y - A_{Omega^c} x_{Omega^c}
  const Vector resid = inst_.y - inst_.op.forward(x) + a_blocks_[i] * x_blk;
  // alpha_{Omega,Omega^c} x_{Omega^c} = (P x)_Omega - alpha_{Omega,Omega} x_Omega
  const Matrix xm = x.reshaped(p, q);
  const Vector px = (prec_.alpha_l * xm * prec_.alpha_r).reshaped();
  const Matrix h_prior = restricted_precision(idx, prec_, p);
  const Vector coupling = gather(px, idx) - h_prior * x_blk;

  const Vector rhs = prec_.beta * (a_blocks_[i].transpose() * resid) - coupling;
  const Matrix &w = roots_[i];
  Vector next = w * factors_[i].solve(w * rhs);
  for (std::size_t k = 0; k < idx.size(); ++k)
    x(idx[k]) = next(static_cast<Index>(k));
  return next;
}

void BlockDescent::sweep(Vector &x, int k_sweeps) const {
  if (factors_.size() != part_.blocks.size())
    throw std::logic_error("BlockDescent::sweep called before set_precisions");
  for (int k = 0; k < k_sweeps; ++k)
    for (std::size_t i = 0; i < part_.blocks.size(); ++i)
      update_block(x, i);
}

Matrix BlockDescent::block_covariance(std::size_t i) const {
  const Matrix half = factors_.at(i).matrixL().solve(roots_.at(i));
  return half.transpose() * half;
}

BlockCovariance BlockDescent::covariance() const {
  BlockCovariance cov;
  for (std::size_t i = 0; i < factors_.size(); ++i)
    cov.blocks.push_back(block_covariance(i));
  return cov;
}

double BlockDescent::trace_a_sigma_at(const BlockCovariance &cov) const {
  double t = 0.0;
  for (std::size_t b = 0; b < cov.blocks.size(); ++b)
    t += cov.blocks[b].cwiseProduct(gram_blocks_[b]).sum();
  return t;
}

BlockUpdate block_map_update(const Matrix &x_hat, const PrecisionState &prec,
                             const ProblemInstance &inst, const BlockPartition &part, std::size_t i,
                             double jitter) {
  if (i >= part.blocks.size())
    throw std::out_of_range("block_map_update: block index out of range");
  BlockDescent bd(inst, part);
  bd.set_precisions(prec, jitter);
  Vector x = vec(x_hat);
  Vector blk = bd.update_block(x, i);
  return BlockUpdate{std::move(blk), bd.block_covariance(i)};
}

Estimate solve_accelerated(const ProblemInstance &inst, const Hyperparameters &hyper,
                           const BlockPartition &part, int k_sweeps) {
  if (k_sweeps < 1)
    throw std::invalid_argument("solve_accelerated: k_sweeps must be at least 1");
  const SolverState init = init_state(inst, hyper);
  const Index p = inst.p(), q = inst.q();
  PriorCovariance cov{Matrix::Identity(p, p), Matrix::Identity(q, q)};
  double beta = init.precisions.beta;
  BlockDescent bd(inst, part);
  Vector x = vec(init.x_hat);
  std::vector<IterationRecord> history;
  bool converged = false;
  int iter = 0;
  auto moment = [&](const Matrix &m, double dof) {
    Matrix reg = symmetrize(m);
    reg.diagonal().array() += hyper.epsilon_scale;
    return Matrix(reg / dof);
  };
  while (iter < hyper.max_iter) {
    ++iter;
    const Matrix prev = unvec(x, p, q);

    PrecisionState prec = to_precision(cov, beta);
    bd.set_precisions(prec, hyper.jitter);
    bd.sweep(x, k_sweeps);
    Matrix x_hat = unvec(x, p, q);
    const double objective = neg_log_joint(x_hat, prec, inst);
    const BlockCovariance first = bd.covariance();
    cov.left = moment(block_trace_contract_right(part, first, prec.alpha_r) +
                          x_hat * prec.alpha_r * x_hat.transpose(),
                      hyper.left_dof(q));

    prec.alpha_l = spd_inverse(cov.left);
    bd.set_precisions(prec, hyper.jitter);
    bd.sweep(x, k_sweeps);
    x_hat = unvec(x, p, q);
    const BlockCovariance second = bd.covariance();
    cov.right = moment(block_trace_contract_left(part, second, prec.alpha_l) +
                           x_hat.transpose() * prec.alpha_l * x_hat,
                       hyper.right_dof(p));

    cov = balance_covariances(cov, x_hat, hyper.scale_rule);
    const double residual_sq = (inst.y - inst.op.forward(x)).squaredNorm();
    beta = noise_precision_from(residual_sq, bd.trace_a_sigma_at(second), inst.m(), hyper);
    if (!x.allFinite() || !cov.left.allFinite() || !cov.right.allFinite() || !std::isfinite(beta))
      throw SolverError("rsvm-accel: non-finite state at iteration " + std::to_string(iter) +
                        " (beta=" + std::to_string(beta) + ")");

    const double change = relative_change(x_hat, prev);
    history.push_back({iter, change, objective, beta, effective_rank(x_hat), 2 * k_sweeps});
    if (change < hyper.tol) {
      converged = true;
      break;
    }
  }
  const Matrix x_hat = unvec(x, p, q);
  return Estimate{x_hat, effective_rank(x_hat), beta, iter, converged, std::move(history)};
}

} // namespace rsvm
