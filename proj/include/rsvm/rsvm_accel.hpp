#pragma once

#include "rsvm/rsvm_core.hpp"

#include <vector>

namespace rsvm {

enum class BlockStrategy { Columns, Rows, Grid };

/// Disjoint index sets covering [p] x [q]; each block lists vec indices
/// (i + j*p) in ascending order.
struct BlockPartition {
  std::vector<std::vector<Index>> blocks;
  BlockStrategy strategy = BlockStrategy::Columns;
  Index p = 0, q = 0;
};

/// Columns or rows split into n_blocks groups whose sizes differ by at most one
/// (larger groups first).
BlockPartition partition_blocks(Index p, Index q, BlockStrategy strategy, Index n_blocks);

/// s x t grid of near-equal (p/s) x (q/t) tiles.
BlockPartition partition_grid(Index p, Index q, Index s, Index t);

/// Per-block posterior covariances; cross-block terms are taken as zero.
struct BlockCovariance {
  std::vector<Matrix> blocks;
};

Matrix block_trace_contract_right(const BlockPartition &part, const BlockCovariance &cov,
                                  const Matrix &alpha_r);
Matrix block_trace_contract_left(const BlockPartition &part, const BlockCovariance &cov,
                                 const Matrix &alpha_l);

/// Scatters the blocks into a dense pq x pq matrix.
Matrix scatter_block_covariance(const BlockPartition &part, const BlockCovariance &cov);

/// Block descent on the fixed-precision MAP objective. Factorizes
/// alpha_{Omega,Omega} + beta A_Omega^T A_Omega once per precision state and
/// reuses it across sweeps. The factorization is done in whitened form,
/// I + beta W A^T A W with W = alpha_{Omega,Omega}^{-1/2}.
class BlockDescent {
public:
  BlockDescent(const ProblemInstance &inst, BlockPartition part);

  /// Refactorize the per-block systems for new precisions.
  void set_precisions(const PrecisionState &prec, double jitter = 0.0);

  /// One exact minimization over block i; updates x in place and returns the
  /// new block values.
  Vector update_block(Vector &x, std::size_t i) const;

  /// K ascending-order sweeps over all blocks.
  void sweep(Vector &x, int k_sweeps) const;

  /// Sigma_Omega = (alpha_{Omega,Omega} + beta A_Omega^T A_Omega)^{-1} per block.
  BlockCovariance covariance() const;
  Matrix block_covariance(std::size_t i) const;

  /// sum_i tr(A_i Sigma_i A_i^T)
  double trace_a_sigma_at(const BlockCovariance &cov) const;

  const BlockPartition &partition() const { return part_; }

private:
  const ProblemInstance &inst_;
  BlockPartition part_;
  std::vector<Matrix> a_blocks_;    // A_Omega, m x |Omega|
  std::vector<Matrix> gram_blocks_; // A_Omega^T A_Omega
  std::vector<Eigen::LLT<Matrix>> factors_;
  std::vector<Matrix> roots_; // W per block
  PrecisionState prec_;
};

struct BlockUpdate {
  Vector x_block;
  Matrix sigma_block;
};

/// Single evaluation of the block estimator for block i given the current
/// estimate (the complement entries are held fixed).
BlockUpdate block_map_update(const Matrix &x_hat, const PrecisionState &prec,
                             const ProblemInstance &inst, const BlockPartition &part, std::size_t i,
                             double jitter = 0.0);

/// Same iteration as solve(), with each MAP replaced by k_sweeps block sweeps
/// (warm-started from the previous estimate) and Sigma by its block diagonal.
Estimate solve_accelerated(const ProblemInstance &inst, const Hyperparameters &hyper,
                           const BlockPartition &part, int k_sweeps = 3);

} // namespace rsvm
