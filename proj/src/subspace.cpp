#include "isdbandit/subspace.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace isdbandit {

namespace {

bool is_symmetric(const Matrix& c) {
  const double scale = 1.0 + c.cwiseAbs().maxCoeff();
  return (c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale;
}

Matrix normalized(const Matrix& c) {
  const double mean_diag = c.trace() / static_cast<double>(c.rows());
  return mean_diag > 0.0 ? Matrix(c / mean_diag) : c;
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Jacobi sweeps minimizing the summed squared off-diagonal mass of
// v^T C_i v (real symmetric variant of the Cardoso-Souloumiac rotations).
void jacobi_refine(std::vector<Matrix>& rotated, Matrix& v) {
  const Eigen::Index p = v.cols();
  constexpr double kThreshold = 1e-12;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated_any = false;
    for (Eigen::Index j = 0; j + 1 < p; ++j) {
      for (Eigen::Index k = j + 1; k < p; ++k) {
        double g00 = 0.0, g01 = 0.0, g11 = 0.0;
        for (const Matrix& a : rotated) {
          const double h0 = a(j, j) - a(k, k);
          const double h1 = a(j, k) + a(k, j);
          g00 += h0 * h0;
          g01 += h0 * h1;
          g11 += h1 * h1;
        }
        const double ton = g00 - g11;
        const double toff = 2.0 * g01;
        const double theta = 0.5 * std::atan2(toff, ton + std::hypot(ton, toff));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        if (std::abs(s) <= kThreshold) continue;
        rotated_any = true;
        const Vector vj = v.col(j);
        v.col(j) = c * vj + s * v.col(k);
        v.col(k) = -s * vj + c * v.col(k);
        for (Matrix& a : rotated) {
          const Eigen::RowVectorXd rj = a.row(j);
          a.row(j) = c * rj + s * a.row(k);
          a.row(k) = -s * rj + c * a.row(k);
          const Vector cj = a.col(j);
          a.col(j) = c * cj + s * a.col(k);
          a.col(k) = -s * cj + c * a.col(k);
        }
      }
    }
    if (!rotated_any) break;
  }
}

void check_blocks(const std::vector<std::vector<int>>& blocks, int p) {
  std::vector<int> seen(p, 0);
  for (const auto& block : blocks) {
    if (block.empty()) throw InvalidInput("empty block in partition");
    for (int idx : block) {
      if (idx < 0 || idx >= p) throw InvalidInput("block index out of range");
      if (seen[idx]++) throw InvalidInput("blocks overlap at column " + std::to_string(idx));
    }
  }
  for (int i = 0; i < p; ++i)
    if (!seen[i]) throw InvalidInput("blocks do not cover column " + std::to_string(i));
}

struct WindowFits {
  // coefs[b][w]: coefficient vector of block b in window w
  std::vector<std::vector<Vector>> coefs;
  std::vector<bool> singular;
  std::vector<double> min_block_eig;  // smallest eigenvalue of Z_b^T Z_b / n
  std::vector<std::string> diagnostics;
  double sigma_hat = 0.0;
  Eigen::Index min_window = 0;
};

bool well_conditioned(const Matrix& g, double* min_eig = nullptr) {
  if (g.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (min_eig) *min_eig = lo;
  return hi > 0.0 && lo > 1e-10 * hi;
}

WindowFits fit_windows(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                       std::span<const Window> windows) {
  const auto p = static_cast<int>(u.rows());
  if (u.cols() != p) throw InvalidInput("classify_blocks: U must be square");
  check_blocks(blocks, p);
  if (windows.empty()) throw InvalidInput("classify_blocks: no windows");
  std::size_t largest = 0;
  for (const auto& b : blocks) largest = std::max(largest, b.size());

  WindowFits fits;
  fits.coefs.assign(blocks.size(), {});
  fits.singular.assign(blocks.size(), false);
  fits.min_block_eig.assign(blocks.size(), std::numeric_limits<double>::infinity());
  fits.min_window = std::numeric_limits<Eigen::Index>::max();

  double rss = 0.0;
  double dof = 0.0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const Window& win = windows[w];
    if (win.features.cols() != p || win.features.rows() != win.rewards.size())
      throw InvalidInput("classify_blocks: window shape mismatch");
    const Eigen::Index n = win.features.rows();
    if (static_cast<std::size_t>(n) < largest)
      throw InvalidInput("classify_blocks: window smaller than the largest block");
    fits.min_window = std::min(fits.min_window, n);

    const Matrix z = win.features * u;
    const Matrix g = z.transpose() * z;
    const bool full_ok = n > p && well_conditioned(g);
    Vector full_coef;
    if (full_ok) {
      full_coef = g.ldlt().solve(z.transpose() * win.rewards);
      rss += (win.rewards - z * full_coef).squaredNorm();
      dof += static_cast<double>(n - p);
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& idx = blocks[b];
      const Matrix zb = z(Eigen::all, idx);
      const Matrix gb = zb.transpose() * zb;
      double lo = 0.0;
      if (!well_conditioned(gb, &lo)) {
        if (!fits.singular[b]) {
          std::ostringstream msg;
          msg << "block " << b << " has a singular Gram matrix in window " << w
              << "; labeled residual";
          fits.diagnostics.push_back(msg.str());
        }
        fits.singular[b] = true;
        fits.coefs[b].push_back(Vector::Zero(static_cast<Eigen::Index>(idx.size())));
        continue;
      }
      fits.min_block_eig[b] = std::min(fits.min_block_eig[b], lo / static_cast<double>(n));
      if (full_ok) {
        fits.coefs[b].push_back(full_coef(idx));
      } else {
        fits.coefs[b].push_back(gb.ldlt().solve(zb.transpose() * win.rewards));
      }
    }
  }
  fits.sigma_hat = dof > 0.0 ? std::sqrt(rss / dof) : 0.0;
  return fits;
}

double pairwise_spread(const std::vector<Vector>& coefs) {
  double spread = 0.0;
  for (std::size_t i = 0; i < coefs.size(); ++i)
    for (std::size_t j = i + 1; j < coefs.size(); ++j)
      spread = std::max(spread, (coefs[i] - coefs[j]).norm());
  return spread;
}

}  // namespace

void IsdBasis::validate(double tol) const {
  if (u_inv.rows() != u_res.rows()) throw InvalidInput("ISD basis row mismatch");
  if (p_res() < 1) throw InvalidInput("ISD basis needs at least one residual direction");
  if (p_inv() + p_res() != p()) throw InvalidInput("ISD basis dimensions do not sum to p");
  if (orthonormality_error(u_inv) > tol || orthonormality_error(u_res) > tol)
    throw InvalidInput("ISD basis columns are not orthonormal");
  if (p_inv() > 0 && (u_inv.transpose() * u_res).cwiseAbs().maxCoeff() > tol)
    throw InvalidInput("invariant and residual bases are not orthogonal");
}

void BlockPartition::validate(int p) const {
  if (labels.size() != blocks.size()) throw InvalidInput("partition labels/blocks mismatch");
  check_blocks(blocks, p);
}

bool BlockPartition::has_residual() const {
  return std::find(labels.begin(), labels.end(), BlockLabel::residual) != labels.end();
}

Matrix gram(std::span<const Vector> features, double reg, Eigen::Index dim) {
  if (reg < 0.0) throw InvalidInput("gram: negative regularization");
  Matrix g = reg * Matrix::Identity(dim, dim);
  for (const Vector& x : features) {
    if (x.size() != dim) throw InvalidInput("gram: feature dimension mismatch");
    g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Matrix gram_rows(const Matrix& rows, double reg) {
  if (reg < 0.0) throw InvalidInput("gram: negative regularization");
  Matrix g = rows.transpose() * rows;
  g.diagonal().array() += reg;
  return g;
}

double default_coupling_tol(std::span<const Matrix> covs, double samples_per_matrix,
                            double noise_floor) {
  double max_diag = 0.0;
  for (const Matrix& c : covs) max_diag = std::max(max_diag, normalized(c).diagonal().maxCoeff());
  double rel = 0.05;
  if (samples_per_matrix > 0.0) rel = std::max(rel, noise_floor / std::sqrt(samples_per_matrix));
  return rel * max_diag;
}

JointBlockDiagonalization joint_block_diagonalize(std::span<const Matrix> covs,
                                                  double coupling_tol, Engine& rng) {
  if (covs.size() < 2) throw InvalidInput("joint_block_diagonalize needs at least two matrices");
  const Eigen::Index p = covs.front().rows();
  std::vector<Matrix> scaled;
  scaled.reserve(covs.size());
  for (const Matrix& c : covs) {
    if (c.rows() != p || c.cols() != p) throw InvalidInput("covariances differ in shape");
    if (!c.allFinite() || !is_symmetric(c)) throw InvalidInput("covariance is not symmetric");
    scaled.push_back(normalized(c));
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> weights(scaled.size());
  double total = 0.0;
  for (double& w : weights) total += (w = unif(rng));
  Matrix combo = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < scaled.size(); ++i) combo += (weights[i] / total) * scaled[i];

  Eigen::SelfAdjointEigenSolver<Matrix> es(combo);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed in joint_block_diagonalize");
  Matrix v = es.eigenvectors();

  std::vector<Matrix> rotated;
  rotated.reserve(scaled.size());
  for (const Matrix& c : scaled) rotated.push_back(v.transpose() * c * v);
  jacobi_refine(rotated, v);

  DisjointSets sets(static_cast<int>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      double coupling = 0.0;
      for (const Matrix& a : rotated) coupling = std::max(coupling, std::abs(a(j, k)));
      if (coupling > coupling_tol) sets.join(static_cast<int>(j), static_cast<int>(k));
    }
  }
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(p, -1);
  for (int j = 0; j < p; ++j) {
    const int root = sets.find(j);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[root]].push_back(j);
  }
  return {std::move(v), std::move(blocks)};
}

std::vector<double> default_invariance_tolerances(const std::vector<std::vector<int>>& blocks,
                                                  const Matrix& u,
                                                  std::span<const Window> windows,
                                                  double multiplier, double leakage) {
  if (multiplier < 0.0 || leakage < 0.0) throw InvalidInput("tolerance constants must be nonnegative");
  const WindowFits fits = fit_windows(blocks, u, windows);
  const double n = static_cast<double>(fits.min_window);
  double max_spread = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (!fits.singular[b]) max_spread = std::max(max_spread, pairwise_spread(fits.coefs[b]));
  const double leak = leakage * max_spread / std::sqrt(n);
  std::vector<double> tol(blocks.size(), 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    double scale = 0.0;
    for (const Vector& c : fits.coefs[b]) scale = std::max(scale, c.cwiseAbs().maxCoeff());
    const double floor = 1e-9 * (1.0 + scale);
    if (fits.singular[b]) {
      tol[b] = floor;
      continue;
    }
    const double k = static_cast<double>(blocks[b].size());
    tol[b] = std::max(floor, multiplier * fits.sigma_hat * std::sqrt(k / (n * fits.min_block_eig[b])) + leak);
  }
  return tol;
}

BlockClassification classify_blocks(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                    std::span<const Window> windows,
                                    std::span<const double> invariance_tol) {
  if (invariance_tol.size() != blocks.size())
    throw InvalidInput("classify_blocks: one tolerance per block required");
  const WindowFits fits = fit_windows(blocks, u, windows);
  BlockClassification out;
  out.partition.blocks = blocks;
  out.diagnostics = fits.diagnostics;
  out.sigma_hat = fits.sigma_hat;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& coefs = fits.coefs[b];
    const double spread = pairwise_spread(coefs);
    double variance = 0.0;
    if (coefs.size() > 1) {
      Vector mean = Vector::Zero(coefs.front().size());
      for (const Vector& c : coefs) mean += c;
      mean /= static_cast<double>(coefs.size());
      for (const Vector& c : coefs) variance += (c - mean).squaredNorm();
      variance /= static_cast<double>(coefs.size() - 1);
    }
    if (fits.singular[b]) variance = std::numeric_limits<double>::infinity();
    out.spread.push_back(spread);
    out.coef_variance.push_back(variance);
    const bool invariant = !fits.singular[b] && spread <= invariance_tol[b];
    out.partition.labels.push_back(invariant ? BlockLabel::invariant : BlockLabel::residual);
  }
  return out;
}

BlockClassification classify_blocks(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                    std::span<const Window> windows, double invariance_tol) {
  if (!(invariance_tol > 0.0)) throw InvalidInput("invariance tolerance must be positive");
  const std::vector<double> tol(blocks.size(), invariance_tol);
  return classify_blocks(blocks, u, windows, tol);
}

bool force_residual_block(BlockClassification& classification) {
  auto& part = classification.partition;
  if (part.has_residual() || part.blocks.empty()) return false;
  const auto it = std::max_element(classification.coef_variance.begin(),
                                   classification.coef_variance.end());
  const auto b = static_cast<std::size_t>(it - classification.coef_variance.begin());
  part.labels[b] = BlockLabel::residual;
  classification.diagnostics.push_back("all blocks invariant; forced block " + std::to_string(b) +
                                       " residual");
  return true;
}

Matrix rotate_blocks_by_variation(const std::vector<std::vector<int>>& blocks, const Matrix& u,
                                  std::span<const Window> windows) {
  const WindowFits fits = fit_windows(blocks, u, windows);
  Matrix out = u;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& idx = blocks[b];
    const auto& coefs = fits.coefs[b];
    if (idx.size() < 2 || fits.singular[b] || coefs.size() < 2) continue;
    const auto k = static_cast<Eigen::Index>(idx.size());
    Vector mean = Vector::Zero(k);
    for (const Vector& c : coefs) mean += c;
    mean /= static_cast<double>(coefs.size());
    Matrix cov = Matrix::Zero(k, k);
    for (const Vector& c : coefs) cov.noalias() += (c - mean) * (c - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed in rotate_blocks_by_variation");
    const Matrix r = es.eigenvectors().rowwise().reverse();
    out(Eigen::all, idx) = u(Eigen::all, idx) * r;
  }
  return out;
}

void label_by_rank(BlockClassification& classification, int p_res) {
  auto& part = classification.partition;
  int total = 0;
  for (const auto& b : part.blocks) total += static_cast<int>(b.size());
  if (p_res < 1 || p_res > total) throw InvalidInput("label_by_rank: p_res out of range");
  const auto& var = classification.coef_variance;
  std::vector<std::size_t> order(part.blocks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool sa = !std::isfinite(var[a]), sb = !std::isfinite(var[b]);
    if (sa != sb) return sa;
    return !sa && var[a] > var[b];
  });
  int taken = 0;
  for (std::size_t b : order) {
    part.labels[b] = taken < p_res ? BlockLabel::residual : BlockLabel::invariant;
    if (part.labels[b] == BlockLabel::residual) taken += static_cast<int>(part.blocks[b].size());
  }
  if (taken != p_res)
    classification.diagnostics.push_back("ranked residual blocks hold " + std::to_string(taken) +
                                         " columns, requested " + std::to_string(p_res));
}

IsdBasis assemble_basis(const BlockPartition& partition, const Matrix& u) {
  partition.validate(static_cast<int>(u.cols()));
  if (!partition.has_residual()) throw InvalidInput("partition has no residual block");
  std::vector<int> inv_cols, res_cols;
  for (std::size_t b = 0; b < partition.blocks.size(); ++b) {
    auto& dst = partition.labels[b] == BlockLabel::invariant ? inv_cols : res_cols;
    dst.insert(dst.end(), partition.blocks[b].begin(), partition.blocks[b].end());
  }
  IsdBasis basis;
  basis.u_inv = u(Eigen::all, inv_cols);
  basis.u_res = u(Eigen::all, res_cols);
  return basis;
}

double orthonormality_error(const Matrix& a) {
  if (a.cols() == 0) return 0.0;
  return (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff();
}

double principal_angle_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("principal_angle_distance: shapes differ");
  if (orthonormality_error(a) > 1e-8 || orthonormality_error(b) > 1e-8)
    throw InvalidInput("principal_angle_distance: inputs must have orthonormal columns");
  if (a.cols() == 0) return 0.0;
  // sin of the largest angle via the component of B outside span(A); this
  // avoids the cancellation in sqrt(1 - cos^2) for nearly equal subspaces.
  const Matrix outside = b - a * (a.transpose() * b);
  Eigen::JacobiSVD<Matrix> svd(outside);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

double projector_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidInput("projector_distance: row mismatch");
  const Matrix diff = a * a.transpose() - b * b.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace isdbandit
