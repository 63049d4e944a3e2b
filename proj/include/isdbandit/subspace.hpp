#pragma once

#include "isdbandit/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace isdbandit {

/// Orthonormal bases of the invariant and residual subspaces.
///
/// `u_inv` is p x p_inv and may have zero columns (no invariant directions);
/// `u_res` is p x p_res with p_res >= 1. Together the columns form an
/// orthonormal basis of R^p.
struct IsdBasis {
  Matrix u_inv;
  Matrix u_res;

  Eigen::Index p() const { return u_res.rows(); }
  Eigen::Index p_inv() const { return u_inv.cols(); }
  Eigen::Index p_res() const { return u_res.cols(); }

  Matrix projector_inv() const { return u_inv * u_inv.transpose(); }
  Matrix projector_res() const { return u_res * u_res.transpose(); }

  /// Throws InvalidInput unless orthonormality, mutual orthogonality and the
  /// dimension constraints hold to within `tol` (max-entry norm).
  void validate(double tol = 1e-10) const;
};

enum class BlockLabel { invariant, residual };

/// Column-index blocks of an orthonormal matrix, each tagged invariant or
/// residual. Indices are 0-based.
struct BlockPartition {
  std::vector<std::vector<int>> blocks;
  std::vector<BlockLabel> labels;

  /// Checks the blocks are disjoint and cover {0..p-1}, with labels aligned.
  void validate(int p) const;
  bool has_residual() const;
};

/// reg * I + sum_i x_i x_i^T. Every vector must have `dim` entries.
Matrix gram(std::span<const Vector> features, double reg, Eigen::Index dim);

/// Same as `gram` with the feature vectors stored as rows of `rows`.
Matrix gram_rows(const Matrix& rows, double reg);

struct JointBlockDiagonalization {
  Matrix u;                              // orthonormal p x p
  std::vector<std::vector<int>> blocks;  // partition of the columns of u
};

/// Scale-relative coupling threshold for a family of sample covariances.
///
/// Returns max(0.05, noise_floor / sqrt(samples_per_matrix)) times the
/// largest diagonal entry of the trace-normalized matrices. Pass
/// samples_per_matrix = 0 for exact (noiseless) inputs.
double default_coupling_tol(std::span<const Matrix> covs, double samples_per_matrix,
                            double noise_floor = 3.0);

/// Approximate joint block diagonalization of symmetric matrices.
///
/// Each input is first normalized to unit mean diagonal. A random convex
/// combination (weights from `rng`) is eigendecomposed, the basis is refined
/// by Jacobi joint-diagonalization sweeps over all matrices, and columns are
/// grouped into the connected components of the coupling graph
/// (edge j-k iff max_i |u_j^T C_i u_k| > coupling_tol on the normalized C_i).
JointBlockDiagonalization joint_block_diagonalize(std::span<const Matrix> covs,
                                                  double coupling_tol, Engine& rng);

/// Observations from one time window: rows of `features` with matching rewards.
struct Window {
  Matrix features;  // n x p
  Vector rewards;   // n
};

struct BlockClassification {
  BlockPartition partition;
  std::vector<double> spread;         // max pairwise distance of window coefficients
  std::vector<double> coef_variance;  // summed per-window coefficient variance, inf if singular
  std::vector<std::string> diagnostics;
  double sigma_hat = 0.0;             // pooled residual standard deviation
};

/// Per-block invariance tolerance
///   multiplier * sigma_hat * sqrt(k / (n * v)) + leakage * S / sqrt(n),
/// with k the block size, n the smallest window size, v the smallest
/// eigenvalue of the block's per-window normalized Gram matrix and S the
/// largest coefficient spread over all blocks. The second term absorbs drift
/// that leaks into invariant directions through basis estimation error.
std::vector<double> default_invariance_tolerances(const std::vector<std::vector<int>>& blocks,
                                                  const Matrix& u,
                                                  std::span<const Window> windows,
                                                  double multiplier = 6.0, double leakage = 3.0);

/// Labels each block invariant iff the largest pairwise 2-norm distance of
/// its per-window OLS coefficients is at most the block's tolerance.
///
/// Coefficients come from regressing the rewards on all coordinates u^T x in
/// each window. Blocks whose per-window Gram is singular are labeled
/// residual and a diagnostic is recorded.
BlockClassification classify_blocks(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                    std::span<const Window> windows,
                                    std::span<const double> invariance_tol);

BlockClassification classify_blocks(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                    std::span<const Window> windows, double invariance_tol);

/// If every block is invariant, relabels the block with the largest
/// coefficient variance as residual. Returns true when a block was relabeled.
bool force_residual_block(BlockClassification& classification);

/// Rotates the columns of every multi-column block onto the eigenvectors of
/// the across-window covariance of its OLS coefficients, largest first.
/// Block spans are unchanged; singular blocks are left as they are.
Matrix rotate_blocks_by_variation(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                  std::span<const Window> windows);

/// Relabels by rank instead of tolerance: blocks in decreasing order of
/// coefficient variance (singular blocks first) become residual until they
/// hold at least `p_res` columns; the rest become invariant.
void label_by_rank(BlockClassification& classification, int p_res);

/// Stacks invariant-labeled columns into u_inv and the rest into u_res.
/// Throws InvalidInput when no block is residual.
IsdBasis assemble_basis(const BlockPartition& partition, const Matrix& u);

/// Largest principal angle sine between the column spans of two orthonormal
/// p x k matrices; equals the operator-norm distance of their projectors.
double principal_angle_distance(const Matrix& a, const Matrix& b);

/// ||A A^T - B B^T||_op for orthonormal A, B of any column counts.
double projector_distance(const Matrix& a, const Matrix& b);

/// Max-entry deviation of a^T a from the identity.
double orthonormality_error(const Matrix& a);

}  // namespace isdbandit
