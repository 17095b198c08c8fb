#pragma once

#include <Eigen/Eigenvalues>
#include <vector>

#include "dcd/common.hpp"
#include "dcd/topology.hpp"

namespace dcd {

/// Mixing weights over one sub-network. `weights` is the symmetric
/// doubly-stochastic matrix A_e indexed by member position; `averaged` is
/// 0.5(I + A_e), the matrix actually applied in the dual combination step.
struct CombinationMatrix {
  int sub_network_id = 0;
  Matrix weights;
  Matrix averaged;
};

/// a_sk = 1 / (1 + max(deg s, deg k)) for induced neighbors, remainder on
/// the diagonal. Degrees are taken within the induced sub-graph. This
/// variant keeps every diagonal entry strictly positive, so the weights are
/// always primitive on a connected sub-network.
inline CombinationMatrix metropolis_matrix(const SubNetwork& sub) {
  const int n = sub.size;
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (sub.induced_adjacent(sub.members[i], sub.members[j])) {
        const int di = sub.induced_degree(sub.members[i]);
        const int dj = sub.induced_degree(sub.members[j]);
        a(i, j) = a(j, i) = 1.0 / (1.0 + std::max(di, dj));
      }
  for (int i = 0; i < n; ++i) a(i, i) = 1.0 - a.row(i).sum();
  CombinationMatrix cm;
  cm.sub_network_id = sub.constraint_id;
  cm.weights = a;
  cm.averaged = 0.5 * (Matrix::Identity(n, n) + a);
  return cm;
}

inline Matrix averaged_coefficients(const Matrix& weights) {
  return 0.5 * (Matrix::Identity(weights.rows(), weights.cols()) + weights);
}

struct CombinationReport {
  bool symmetric = false;
  bool doubly_stochastic = false;
  bool sparsity_ok = false;
  bool primitive = false;
  bool spectrum_ok = false;
  double max_asymmetry = 0.0;
  double max_stochasticity_violation = 0.0;  // row/col sums and negativity
  double max_sparsity_violation = 0.0;
  double min_eigenvalue = 0.0;

  bool pass() const {
    return symmetric && doubly_stochastic && sparsity_ok && primitive && spectrum_ok;
  }
};

/// Checks a candidate weight matrix against every condition a combination
/// matrix must satisfy: symmetry, double stochasticity, the neighborhood
/// sparsity pattern, primitivity (positive diagonal somewhere plus a
/// connected positive-weight graph), and eigenvalues in (-1, 1].
inline CombinationReport validate_combination(const Matrix& a, const SubNetwork& sub,
                                              double tol = 1e-12) {
  const int n = sub.size;
  if (a.rows() != n || a.cols() != n)
    throw DimensionMismatch("combination matrix size does not match sub-network");
  CombinationReport rep;

  rep.max_asymmetry = (a - a.transpose()).cwiseAbs().maxCoeff();
  rep.symmetric = rep.max_asymmetry <= tol;

  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs(a.row(i).sum() - 1.0));
    worst = std::max(worst, std::abs(a.col(i).sum() - 1.0));
  }
  if (a.minCoeff() < 0.0) worst = std::max(worst, -a.minCoeff());
  rep.max_stochasticity_violation = worst;
  rep.doubly_stochastic = worst <= tol;

  double sparsity = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !sub.induced_adjacent(sub.members[i], sub.members[j]))
        sparsity = std::max(sparsity, std::abs(a(i, j)));
  rep.max_sparsity_violation = sparsity;
  rep.sparsity_ok = sparsity <= tol;

  bool positive_diag = false;
  for (int i = 0; i < n; ++i) positive_diag |= a(i, i) > tol;
  std::vector<std::pair<int, int>> positive_edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a(i, j) > tol) positive_edges.push_back({sub.members[i], sub.members[j]});
  rep.primitive =
      positive_diag && detail::reaches_all(n, sub.members, positive_edges);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()),
                                            Eigen::EigenvaluesOnly);
  rep.min_eigenvalue = eig.eigenvalues().minCoeff();
  rep.spectrum_ok = rep.min_eigenvalue > -1.0 + tol &&
                    eig.eigenvalues().maxCoeff() <= 1.0 + tol;
  return rep;
}

/// Second-largest eigenvalue of an averaged matrix (the largest is 1).
/// Convention: a 1x1 matrix has gap 0 -- a singleton mixes instantly.
inline double spectral_gap(const Matrix& averaged, double tol = 1e-10) {
  if ((averaged - averaged.transpose()).cwiseAbs().maxCoeff() > tol)
    throw Error("spectral_gap expects a symmetric matrix");
  if (averaged.rows() == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(averaged, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(averaged.rows() - 2);
}

/// blkdiag{ M_e kron I_{S_e} } over all sub-networks.
inline Matrix block_kron_diagonal(const std::vector<Matrix>& blocks,
                                  const std::vector<int>& row_dims) {
  if (blocks.size() != row_dims.size())
    throw DimensionMismatch("one row dimension required per block");
  int total = 0;
  for (size_t e = 0; e < blocks.size(); ++e)
    total += static_cast<int>(blocks[e].rows()) * row_dims[e];
  Matrix out = Matrix::Zero(total, total);
  int offset = 0;
  for (size_t e = 0; e < blocks.size(); ++e) {
    const int n = static_cast<int>(blocks[e].rows());
    const int s = row_dims[e];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.block(offset + i * s, offset + j * s, s, s) =
            blocks[e](i, j) * Matrix::Identity(s, s);
    offset += n * s;
  }
  return out;
}

/// Eigen-structure of 0.5(I - blkdiag{A_e kron I}) shared by the corrected
/// dual recursion and the convergence certificates. `u1` spans the range
/// (eigenvalues above the zero threshold), `sigma` holds them in descending
/// order, and `lambda_r` is the smallest of them. A problem whose
/// sub-networks are all singletons has an empty range; `lambda_r` is then
/// reported as 1 so that 1 - lambda_r degrades to 0.
struct SpectralData {
  int total_dim = 0;          // N = sum of N_e * S_e
  std::vector<int> block_sizes;
  Matrix mixing;              // blkdiag{A_e kron I_{S_e}}
  Matrix averaged_mixing;     // blkdiag{0.5(I+A_e) kron I_{S_e}}
  Matrix u1;                  // N x r, orthonormal columns
  Vector sigma;               // r, descending, all in (0,1)
  double lambda_r = 1.0;
  bool degenerate = false;    // r == 0
  double mu_v = 0.0;
  Vector d_weights;           // mu_v * (sigma - sigma^2), the D diagonal

  int range_dim() const { return static_cast<int>(sigma.size()); }
};

inline constexpr double kZeroEigenvalueThreshold = 1e-10;

inline SpectralData build_spectral_data(const std::vector<CombinationMatrix>& matrices,
                                        const std::vector<int>& block_rows,
                                        double mu_v) {
  if (matrices.size() != block_rows.size())
    throw DimensionMismatch("one block row count required per combination matrix");
  for (int s : block_rows)
    if (s < 1) throw DimensionMismatch("block row counts must be >= 1");

  SpectralData sd;
  sd.mu_v = mu_v;
  std::vector<Matrix> weight_blocks, averaged_blocks;
  for (auto& cm : matrices) {
    weight_blocks.push_back(cm.weights);
    averaged_blocks.push_back(cm.averaged);
  }
  sd.mixing = block_kron_diagonal(weight_blocks, block_rows);
  sd.averaged_mixing = block_kron_diagonal(averaged_blocks, block_rows);
  sd.total_dim = static_cast<int>(sd.mixing.rows());
  for (size_t e = 0; e < matrices.size(); ++e)
    sd.block_sizes.push_back(static_cast<int>(matrices[e].weights.rows()) * block_rows[e]);

  const Matrix half = 0.5 * (Matrix::Identity(sd.total_dim, sd.total_dim) - sd.mixing);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(half);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");

  std::vector<int> kept;
  for (int j = 0; j < sd.total_dim; ++j)
    if (eig.eigenvalues()(j) > kZeroEigenvalueThreshold) kept.push_back(j);
  const int r = static_cast<int>(kept.size());
  sd.u1.resize(sd.total_dim, r);
  sd.sigma.resize(r);
  for (int c = 0; c < r; ++c) {              // descending order
    const int j = kept[r - 1 - c];
    sd.sigma(c) = eig.eigenvalues()(j);
    sd.u1.col(c) = eig.eigenvectors().col(j);
  }
  sd.degenerate = r == 0;
  sd.lambda_r = r == 0 ? 1.0 : sd.sigma(r - 1);
  sd.d_weights = mu_v * (sd.sigma.array() - sd.sigma.array().square()).matrix();
  return sd;
}

/// Re-scales the step-dependent D diagonal without repeating the
/// eigendecomposition.
inline SpectralData with_dual_step(SpectralData sd, double mu_v) {
  sd.mu_v = mu_v;
  sd.d_weights = mu_v * (sd.sigma.array() - sd.sigma.array().square()).matrix();
  return sd;
}

}  // namespace dcd
