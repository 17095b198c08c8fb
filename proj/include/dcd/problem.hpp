#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <limits>
#include <map>
#include <vector>

#include "dcd/combiners.hpp"
#include "dcd/common.hpp"
#include "dcd/rng.hpp"
#include "dcd/topology.hpp"

namespace dcd {

enum class CostKind { QuadraticLeastSquares, LogisticWithL2 };

/// Smooth per-agent cost. Quadratic: (1/2T) sum_t (u_t'w - p_t)^2.
/// Logistic: (1/T) sum_t ln(1 + exp(-x_t h_t'w)) + (l2/2)||w||^2, labels
/// x_t in {+1,-1}. The l2 term belongs to the smooth part; it is what makes
/// the logistic cost strongly convex.
class CostFunction {
 public:
  static CostFunction quadratic(Matrix regressors, Vector targets) {
    if (regressors.rows() != targets.size())
      throw DimensionMismatch("one target per regressor row required");
    if (regressors.rows() == 0) throw DimensionMismatch("cost needs at least one sample");
    CostFunction c;
    c.kind_ = CostKind::QuadraticLeastSquares;
    c.regressors_ = std::move(regressors);
    c.targets_ = std::move(targets);
    const double t = static_cast<double>(c.regressors_.rows());
    c.hessian_ = c.regressors_.transpose() * c.regressors_ / t;
    c.linear_ = c.regressors_.transpose() * c.targets_ / t;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.hessian_, Eigen::EigenvaluesOnly);
    c.lipschitz_ = eig.eigenvalues().maxCoeff();
    c.strong_convexity_ = std::max(0.0, eig.eigenvalues().minCoeff());
    return c;
  }

  /// Convenience form for costs given as 0.5 w'H w - d'w with H positive
  /// definite; synthesizes an equivalent sample set.
  static CostFunction quadratic_from_moments(const Matrix& hessian, const Vector& linear) {
    Eigen::LLT<Matrix> llt(hessian);
    if (llt.info() != Eigen::Success)
      throw Error("moment form requires a positive definite quadratic term");
    const double t = static_cast<double>(hessian.rows());
    Matrix regressors = std::sqrt(t) * Matrix(llt.matrixL().transpose());
    Vector targets =
        std::sqrt(t) * llt.matrixL().solve(linear);
    return quadratic(std::move(regressors), std::move(targets));
  }

  static CostFunction logistic(Matrix regressors, Vector labels, double l2) {
    if (regressors.rows() != labels.size())
      throw DimensionMismatch("one label per regressor row required");
    if (regressors.rows() == 0) throw DimensionMismatch("cost needs at least one sample");
    for (Eigen::Index t = 0; t < labels.size(); ++t)
      if (labels(t) != 1.0 && labels(t) != -1.0)
        throw Error("logistic labels must be +1 or -1");
    if (l2 < 0.0) throw Error("l2 weight must be non-negative");
    CostFunction c;
    c.kind_ = CostKind::LogisticWithL2;
    c.regressors_ = std::move(regressors);
    c.targets_ = std::move(labels);
    c.l2_ = l2;
    const double t = static_cast<double>(c.regressors_.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(
        c.regressors_.transpose() * c.regressors_ / t, Eigen::EigenvaluesOnly);
    c.lipschitz_ = 0.25 * eig.eigenvalues().maxCoeff() + l2;
    c.strong_convexity_ = l2;
    return c;
  }

  CostKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(regressors_.cols()); }
  int sample_count() const { return static_cast<int>(regressors_.rows()); }
  double lipschitz() const { return lipschitz_; }
  double strong_convexity() const { return strong_convexity_; }
  const Matrix& regressors() const { return regressors_; }
  const Vector& targets() const { return targets_; }
  double l2_weight() const { return l2_; }

  // Quadratic moments: gradient(w) = hessian*w - linear.
  const Matrix& quadratic_hessian() const { return hessian_; }
  const Vector& quadratic_linear() const { return linear_; }

  double value(const Vector& w) const {
    check_dim(w);
    const double t = static_cast<double>(regressors_.rows());
    if (kind_ == CostKind::QuadraticLeastSquares)
      return (regressors_ * w - targets_).squaredNorm() / (2.0 * t);
    const Vector margins = -(targets_.array() * (regressors_ * w).array()).matrix();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      const double z = margins(i);  // ln(1+e^z), stable for large |z|
      acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    }
    return acc / t + 0.5 * l2_ * w.squaredNorm();
  }

  Vector gradient(const Vector& w) const {
    check_dim(w);
    if (kind_ == CostKind::QuadraticLeastSquares) return hessian_ * w - linear_;
    const double t = static_cast<double>(regressors_.rows());
    Vector z = (targets_.array() * (regressors_ * w).array()).matrix();
    Vector s(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) s(i) = -targets_(i) * sigmoid(-z(i));
    return regressors_.transpose() * s / t + l2_ * w;
  }

  Matrix hessian(const Vector& w) const {
    check_dim(w);
    if (kind_ == CostKind::QuadraticLeastSquares) return hessian_;
    const double t = static_cast<double>(regressors_.rows());
    Vector z = (targets_.array() * (regressors_ * w).array()).matrix();
    Vector d(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = sigmoid(-z(i));
      d(i) = s * (1.0 - s);
    }
    return regressors_.transpose() * d.asDiagonal() * regressors_ / t +
           l2_ * Matrix::Identity(dim(), dim());
  }

 private:
  static double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  void check_dim(const Vector& w) const {
    if (w.size() != regressors_.cols())
      throw DimensionMismatch("cost input has wrong dimension");
  }

  CostKind kind_ = CostKind::QuadraticLeastSquares;
  Matrix regressors_;
  Vector targets_;
  double l2_ = 0.0;
  Matrix hessian_;
  Vector linear_;
  double lipschitz_ = 0.0;
  double strong_convexity_ = 0.0;
};

enum class RegKind { Zero, L1, SquaredL2, ElasticNet, Box };

/// Closed, convex regularizer with a closed-form proximal map.
class Regularizer {
 public:
  static Regularizer zero(int dim) { return Regularizer(RegKind::Zero, dim, 0, 0, 0, 0); }
  static Regularizer l1(int dim, double eta) {
    return Regularizer(RegKind::L1, dim, eta, 0, 0, 0);
  }
  /// (eta/2) ||w||^2.
  static Regularizer squared_l2(int dim, double eta) {
    return Regularizer(RegKind::SquaredL2, dim, 0, eta, 0, 0);
  }
  /// eta_l1 ||w||_1 + (eta_l2/2) ||w||^2.
  static Regularizer elastic_net(int dim, double eta_l1, double eta_l2) {
    return Regularizer(RegKind::ElasticNet, dim, eta_l1, eta_l2, 0, 0);
  }
  /// Indicator of the coordinate-wise interval [lo, hi].
  static Regularizer box(int dim, double lo, double hi) {
    if (lo > hi) throw Error("box regularizer needs lo <= hi");
    return Regularizer(RegKind::Box, dim, 0, 0, lo, hi);
  }

  RegKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_zero() const { return kind_ == RegKind::Zero; }
  double l1_weight() const { return l1_; }
  double l2_weight() const { return l2_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }

  /// argmin_u R(u) + (1/2 mu) ||x - u||^2.
  Vector prox(double mu, const Vector& x) const {
    if (mu <= 0.0) throw Error("prox step size must be positive");
    check_dim(x);
    switch (kind_) {
      case RegKind::Zero:
        return x;
      case RegKind::L1:
        return soft_threshold(x, mu * l1_);
      case RegKind::SquaredL2:
        return x / (1.0 + mu * l2_);
      case RegKind::ElasticNet:
        return soft_threshold(x, mu * l1_) / (1.0 + mu * l2_);
      case RegKind::Box:
        return x.cwiseMax(lo_).cwiseMin(hi_);
    }
    throw Error("unreachable");
  }

  double value(const Vector& w) const {
    check_dim(w);
    switch (kind_) {
      case RegKind::Zero:
        return 0.0;
      case RegKind::L1:
        return l1_ * w.lpNorm<1>();
      case RegKind::SquaredL2:
        return 0.5 * l2_ * w.squaredNorm();
      case RegKind::ElasticNet:
        return l1_ * w.lpNorm<1>() + 0.5 * l2_ * w.squaredNorm();
      case RegKind::Box:
        for (Eigen::Index j = 0; j < w.size(); ++j)
          if (w(j) < lo_ - 1e-12 || w(j) > hi_ + 1e-12)
            return std::numeric_limits<double>::infinity();
        return 0.0;
    }
    throw Error("unreachable");
  }

  /// Euclidean distance from g to the subdifferential of R at w. The
  /// subdifferential is a coordinate-wise product set for every kind, so the
  /// distance decomposes per coordinate.
  double subdifferential_distance(const Vector& w, const Vector& g) const {
    check_dim(w);
    check_dim(g);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      const double d = coordinate_distance(w(j), g(j));
      if (!std::isfinite(d)) return d;
      acc += d * d;
    }
    return std::sqrt(acc);
  }

 private:
  Regularizer(RegKind kind, int dim, double l1, double l2, double lo, double hi)
      : kind_(kind), dim_(dim), l1_(l1), l2_(l2), lo_(lo), hi_(hi) {
    if (dim < 1) throw Error("regularizer dimension must be positive");
    if (l1 < 0.0 || l2 < 0.0) throw Error("regularizer weights must be non-negative");
  }

  static Vector soft_threshold(const Vector& x, double t) {
    Vector out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j)
      out(j) = x(j) > t ? x(j) - t : (x(j) < -t ? x(j) + t : 0.0);
    return out;
  }

  double coordinate_distance(double w, double g) const {
    switch (kind_) {
      case RegKind::Zero:
        return std::abs(g);
      case RegKind::L1:
        if (w > 0.0) return std::abs(g - l1_);
        if (w < 0.0) return std::abs(g + l1_);
        return std::max(0.0, std::abs(g) - l1_);
      case RegKind::SquaredL2:
        return std::abs(g - l2_ * w);
      case RegKind::ElasticNet: {
        const double gl = g - l2_ * w;
        if (w > 0.0) return std::abs(gl - l1_);
        if (w < 0.0) return std::abs(gl + l1_);
        return std::max(0.0, std::abs(gl) - l1_);
      }
      case RegKind::Box: {
        constexpr double kEdge = 1e-12;
        if (w < lo_ - kEdge || w > hi_ + kEdge)
          return std::numeric_limits<double>::infinity();
        const bool at_lo = w <= lo_ + kEdge;
        const bool at_hi = w >= hi_ - kEdge;
        if (at_lo && at_hi) return 0.0;  // degenerate interval
        if (at_lo) return std::max(0.0, g);
        if (at_hi) return std::max(0.0, -g);
        return std::abs(g);
      }
    }
    throw Error("unreachable");
  }

  void check_dim(const Vector& v) const {
    if (v.size() != dim_) throw DimensionMismatch("regularizer input has wrong dimension");
  }

  RegKind kind_;
  int dim_;
  double l1_, l2_, lo_, hi_;
};

/// One agent's slice of one constraint: B_{e,k} in R^{S_e x Q_k}, b_{e,k}.
struct ConstraintBlock {
  int constraint_id = 0;  // e
  int agent_id = 0;       // k
  Matrix coupling;        // B_{e,k}
  Vector rhs;             // b_{e,k}
};

/// Fully validated problem instance. Construction goes through
/// assemble_problem; afterwards the object is immutable in practice and safe
/// to share across threads.
struct ProblemSpec {
  Network network;
  std::vector<SubNetwork> subnetworks;               // e = 1..E
  std::vector<CostFunction> costs;                   // k = 1..K
  std::vector<Regularizer> regularizers;             // k = 1..K
  std::vector<std::vector<ConstraintBlock>> blocks;  // [e-1][member position]
  std::vector<std::vector<int>> equality_sets;       // [k-1] -> ascending e list
  std::vector<int> block_rows;                       // S_e
  std::vector<int> primal_offsets;                   // size K+1

  int agent_count() const { return network.agent_count; }
  int constraint_count() const { return static_cast<int>(subnetworks.size()); }
  int primal_dim() const { return primal_offsets.back(); }
  int agent_dim(int k) const { return primal_offsets[k] - primal_offsets[k - 1]; }
  int agent_offset(int k) const { return primal_offsets[k - 1]; }

  const ConstraintBlock& block(int e, int k) const {
    return blocks[e - 1][subnetworks[e - 1].position(k)];
  }

  /// Index of constraint e within agent k's equality set.
  int equality_index(int k, int e) const {
    const auto& set = equality_sets[k - 1];
    for (size_t i = 0; i < set.size(); ++i)
      if (set[i] == e) return static_cast<int>(i);
    throw Error("agent " + std::to_string(k) + " is not involved in constraint " +
                std::to_string(e));
  }

  bool smooth() const {
    for (auto& r : regularizers)
      if (!r.is_zero()) return false;
    return true;
  }

  Vector stack(const std::vector<Vector>& per_agent) const {
    Vector out(primal_dim());
    for (int k = 1; k <= agent_count(); ++k) {
      if (per_agent[k - 1].size() != agent_dim(k))
        throw DimensionMismatch("agent vector has wrong dimension");
      out.segment(agent_offset(k), agent_dim(k)) = per_agent[k - 1];
    }
    return out;
  }

  std::vector<Vector> unstack(const Vector& stacked) const {
    if (stacked.size() != primal_dim()) throw DimensionMismatch("bad stacked dimension");
    std::vector<Vector> out;
    out.reserve(agent_count());
    for (int k = 1; k <= agent_count(); ++k)
      out.push_back(stacked.segment(agent_offset(k), agent_dim(k)));
    return out;
  }

  Vector stacked_gradient(const Vector& w) const {
    Vector out(primal_dim());
    for (int k = 1; k <= agent_count(); ++k)
      out.segment(agent_offset(k), agent_dim(k)) =
          costs[k - 1].gradient(w.segment(agent_offset(k), agent_dim(k)));
    return out;
  }

  Vector stacked_prox(double mu, const Vector& x) const {
    Vector out(primal_dim());
    for (int k = 1; k <= agent_count(); ++k)
      out.segment(agent_offset(k), agent_dim(k)) =
          regularizers[k - 1].prox(mu, x.segment(agent_offset(k), agent_dim(k)));
    return out;
  }

  double stacked_regularizer_distance(const Vector& w, const Vector& g) const {
    double acc = 0.0;
    for (int k = 1; k <= agent_count(); ++k) {
      const double d = regularizers[k - 1].subdifferential_distance(
          w.segment(agent_offset(k), agent_dim(k)),
          g.segment(agent_offset(k), agent_dim(k)));
      if (!std::isfinite(d)) return d;
      acc += d * d;
    }
    return std::sqrt(acc);
  }
};

struct SmoothnessParams {
  double delta = 0.0;  // Lipschitz constant of the aggregate gradient
  double nu = 0.0;     // strong-convexity modulus
  bool strongly_convex = false;
  bool curvature_gap = false;  // delta > nu strictly, as the analysis assumes
};

/// The aggregate cost is separable, so its constants are the blockwise
/// extremes. nu = 0 disables the rate certificates downstream; runs are
/// still allowed.
inline SmoothnessParams smoothness_params(const ProblemSpec& problem) {
  SmoothnessParams p;
  p.delta = 0.0;
  p.nu = std::numeric_limits<double>::infinity();
  for (auto& c : problem.costs) {
    p.delta = std::max(p.delta, c.lipschitz());
    p.nu = std::min(p.nu, c.strong_convexity());
  }
  if (!std::isfinite(p.nu)) p.nu = 0.0;
  p.strongly_convex = p.nu > 0.0;
  p.curvature_gap = p.delta > p.nu;
  return p;
}

/// Builds membership maps and validates every structural invariant:
/// constraints exist and are non-empty, every sub-network induces a
/// connected sub-graph, and all block dimensions are consistent.
inline ProblemSpec assemble_problem(std::vector<CostFunction> costs,
                                    std::vector<Regularizer> regularizers,
                                    const std::vector<ConstraintBlock>& raw_blocks,
                                    Network network) {
  const int agent_count = network.agent_count;
  if (static_cast<int>(costs.size()) != agent_count ||
      static_cast<int>(regularizers.size()) != agent_count)
    throw DimensionMismatch("need one cost and one regularizer per agent");
  for (int k = 1; k <= agent_count; ++k)
    if (costs[k - 1].dim() != regularizers[k - 1].dim())
      throw DimensionMismatch("cost and regularizer dimensions differ for agent " +
                              std::to_string(k));

  int constraint_count = 0;
  for (auto& blk : raw_blocks) constraint_count = std::max(constraint_count, blk.constraint_id);
  std::vector<std::map<int, const ConstraintBlock*>> by_constraint(constraint_count);
  for (auto& blk : raw_blocks) {
    if (blk.constraint_id < 1) throw Error("constraint ids are 1-based");
    if (blk.agent_id < 1 || blk.agent_id > agent_count)
      throw Error("block references unknown agent " + std::to_string(blk.agent_id));
    if (!by_constraint[blk.constraint_id - 1].emplace(blk.agent_id, &blk).second)
      throw Error("duplicate block for constraint " + std::to_string(blk.constraint_id) +
                  ", agent " + std::to_string(blk.agent_id));
  }

  ProblemSpec p;
  p.network = std::move(network);
  p.costs = std::move(costs);
  p.regularizers = std::move(regularizers);
  p.primal_offsets.resize(agent_count + 1, 0);
  for (int k = 1; k <= agent_count; ++k)
    p.primal_offsets[k] = p.primal_offsets[k - 1] + p.costs[k - 1].dim();

  p.equality_sets.resize(agent_count);
  for (int e = 1; e <= constraint_count; ++e) {
    auto& entry = by_constraint[e - 1];
    if (entry.empty())
      throw EmptyConstraint("constraint " + std::to_string(e) + " has no blocks");
    std::vector<int> members;
    for (auto& [k, blk] : entry) members.push_back(k);
    SubNetwork sub = induced_subnetwork(p.network, members, e);

    const int rows = static_cast<int>(entry.begin()->second->coupling.rows());
    std::vector<ConstraintBlock> ordered;
    for (int k : sub.members) {
      const ConstraintBlock& blk = *entry.at(k);
      if (blk.coupling.rows() != rows)
        throw DimensionMismatch("constraint " + std::to_string(e) +
                                " has inconsistent row counts across agents");
      if (blk.coupling.cols() != p.costs[k - 1].dim())
        throw DimensionMismatch("block (" + std::to_string(e) + "," + std::to_string(k) +
                                ") does not match the agent dimension");
      if (blk.rhs.size() != rows)
        throw DimensionMismatch("block (" + std::to_string(e) + "," + std::to_string(k) +
                                ") rhs has wrong length");
      ordered.push_back(blk);
      p.equality_sets[k - 1].push_back(e);
    }
    p.subnetworks.push_back(std::move(sub));
    p.blocks.push_back(std::move(ordered));
    p.block_rows.push_back(rows);
  }
  return p;
}

/// Rewrites the right-hand sides so that the given point is exactly
/// feasible: b_{e,k} = B_{e,k} w0_k makes every constraint sum vanish at w0.
inline std::vector<ConstraintBlock> feasible_rhs(std::vector<ConstraintBlock> blocks,
                                                 const std::vector<Vector>& w0) {
  for (auto& blk : blocks) {
    const Vector& wk = w0.at(blk.agent_id - 1);
    if (blk.coupling.cols() != wk.size())
      throw DimensionMismatch("feasible point has wrong dimension for agent " +
                              std::to_string(blk.agent_id));
    blk.rhs = blk.coupling * wk;
  }
  return blocks;
}

/// Network-form coupling operator. Each constraint contributes one block row
/// per member copy; the row for (e, member k) is zero everywhere except
/// B_{e,k} in agent k's column slot. The dual stack is ordered constraint by
/// constraint, members ascending.
struct LiftedProblem {
  Matrix coupling;  // N x primal_dim
  Vector rhs;       // N
  int dual_dim = 0;
  std::vector<int> constraint_offsets;  // size E+1

  int copy_offset(const ProblemSpec& p, int e, int k) const {
    return constraint_offsets[e - 1] +
           p.subnetworks[e - 1].position(k) * p.block_rows[e - 1];
  }
};

inline LiftedProblem lift(const ProblemSpec& p) {
  LiftedProblem lp;
  lp.constraint_offsets.resize(p.constraint_count() + 1, 0);
  for (int e = 1; e <= p.constraint_count(); ++e)
    lp.constraint_offsets[e] = lp.constraint_offsets[e - 1] +
                               p.subnetworks[e - 1].size * p.block_rows[e - 1];
  lp.dual_dim = lp.constraint_offsets.back();
  lp.coupling = Matrix::Zero(lp.dual_dim, p.primal_dim());
  lp.rhs = Vector::Zero(lp.dual_dim);
  for (int e = 1; e <= p.constraint_count(); ++e) {
    const int rows = p.block_rows[e - 1];
    for (int pos = 0; pos < p.subnetworks[e - 1].size; ++pos) {
      const ConstraintBlock& blk = p.blocks[e - 1][pos];
      const int row = lp.constraint_offsets[e - 1] + pos * rows;
      lp.coupling.block(row, p.agent_offset(blk.agent_id), rows,
                        p.agent_dim(blk.agent_id)) = blk.coupling;
      lp.rhs.segment(row, rows) = blk.rhs;
    }
  }
  return lp;
}

/// Single-constraint view used by centralized reference solves and rank
/// diagnostics: row block e is [B_{e,1} ... B_{e,K}] with zeros for
/// non-members, rhs block e is the member sum of b_{e,k}.
struct AggregatedConstraint {
  Matrix coupling;  // (sum_e S_e) x primal_dim
  Vector rhs;
  std::vector<int> offsets;  // size E+1
};

inline AggregatedConstraint aggregated_constraint(const ProblemSpec& p) {
  AggregatedConstraint agg;
  agg.offsets.resize(p.constraint_count() + 1, 0);
  for (int e = 1; e <= p.constraint_count(); ++e)
    agg.offsets[e] = agg.offsets[e - 1] + p.block_rows[e - 1];
  agg.coupling = Matrix::Zero(agg.offsets.back(), p.primal_dim());
  agg.rhs = Vector::Zero(agg.offsets.back());
  for (int e = 1; e <= p.constraint_count(); ++e)
    for (auto& blk : p.blocks[e - 1]) {
      agg.coupling.block(agg.offsets[e - 1], p.agent_offset(blk.agent_id),
                         p.block_rows[e - 1], p.agent_dim(blk.agent_id)) = blk.coupling;
      agg.rhs.segment(agg.offsets[e - 1], p.block_rows[e - 1]) += blk.rhs;
    }
  return agg;
}

/// Per-constraint residual sums at a stacked primal point.
inline Vector constraint_residuals(const ProblemSpec& p, const Vector& w) {
  Vector per_constraint(p.constraint_count());
  for (int e = 1; e <= p.constraint_count(); ++e) {
    Vector sum = Vector::Zero(p.block_rows[e - 1]);
    for (auto& blk : p.blocks[e - 1])
      sum += blk.coupling * w.segment(p.agent_offset(blk.agent_id), p.agent_dim(blk.agent_id)) -
             blk.rhs;
    per_constraint(e - 1) = sum.norm();
  }
  return per_constraint;
}

// ---------------------------------------------------------------------------
// Experiment generators. All randomness flows from one 64-bit seed split into
// topology / data / constraint streams, so instances are bit-reproducible.
// ---------------------------------------------------------------------------

struct RegressionExperimentParams {
  int agents = 20;
  double radius = 0.3;
  int dim = 10;           // Q_k
  int constraint_rows = 3;  // S_e
  int samples = 1000;     // T_k
  double l1 = 0.3;        // eta_1
  double noise_variance = 0.1;
  double zero_fraction = 0.2;  // sparsity of the ground-truth weights
};

struct LogisticExperimentParams {
  int agents = 20;
  double radius = 0.3;
  int dim = 5;
  int constraint_rows = 3;
  int samples = 1000;
  double l1 = 0.1;  // eta_2
  double l2 = 0.1;  // eta_3
};

namespace detail {

inline std::vector<ConstraintBlock> gaussian_neighborhood_blocks(
    const std::vector<SubNetwork>& subs, const std::vector<int>& dims, int rows, Rng& rng) {
  std::vector<ConstraintBlock> blocks;
  for (auto& sub : subs)
    for (int k : sub.members) {
      ConstraintBlock blk;
      blk.constraint_id = sub.constraint_id;
      blk.agent_id = k;
      blk.coupling.resize(rows, dims[k - 1]);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < dims[k - 1]; ++j) blk.coupling(i, j) = rng.normal();
      blk.rhs = Vector::Zero(rows);
      blocks.push_back(std::move(blk));
    }
  return blocks;
}

inline std::vector<Vector> gaussian_points(int count, int dim, Rng& rng) {
  std::vector<Vector> pts(count);
  for (auto& v : pts) {
    v.resize(dim);
    for (int j = 0; j < dim; ++j) v(j) = rng.normal();
  }
  return pts;
}

}  // namespace detail

/// Distributed sparse linear regression over a random geometric network with
/// one neighborhood constraint per agent.
inline ProblemSpec generate_regression_experiment(std::uint64_t seed,
                                                  RegressionExperimentParams prm = {}) {
  Network net = random_geometric_network(prm.agents, prm.radius,
                                         Rng::derive(seed, stream::kTopology));
  std::vector<SubNetwork> subs = neighborhood_subnetworks(net);

  Rng data_rng(Rng::derive(seed, stream::kData));
  std::vector<CostFunction> costs;
  std::vector<Regularizer> regs;
  const double noise_std = std::sqrt(prm.noise_variance);
  for (int k = 1; k <= prm.agents; ++k) {
    Vector truth(prm.dim);
    for (int j = 0; j < prm.dim; ++j) truth(j) = data_rng.normal();
    const int zeros = static_cast<int>(std::lround(prm.zero_fraction * prm.dim));
    std::vector<int> order(prm.dim);
    for (int j = 0; j < prm.dim; ++j) order[j] = j;
    for (int j = prm.dim - 1; j > 0; --j)
      std::swap(order[j], order[data_rng.uniform_int(0, j)]);
    for (int z = 0; z < zeros; ++z) truth(order[z]) = 0.0;
    Matrix regressors(prm.samples, prm.dim);
    Vector targets(prm.samples);
    for (int t = 0; t < prm.samples; ++t) {
      for (int j = 0; j < prm.dim; ++j) regressors(t, j) = data_rng.normal();
      targets(t) = regressors.row(t).dot(truth) + noise_std * data_rng.normal();
    }
    costs.push_back(CostFunction::quadratic(std::move(regressors), std::move(targets)));
    regs.push_back(Regularizer::l1(prm.dim, prm.l1));
  }

  Rng constraint_rng(Rng::derive(seed, stream::kConstraints));
  std::vector<int> dims(prm.agents, prm.dim);
  auto blocks = detail::gaussian_neighborhood_blocks(subs, dims, prm.constraint_rows,
                                                     constraint_rng);
  // Feasibility anchor drawn independently of the regression ground truth.
  auto anchor = detail::gaussian_points(prm.agents, prm.dim, constraint_rng);
  blocks = feasible_rhs(std::move(blocks), anchor);
  return assemble_problem(std::move(costs), std::move(regs), blocks, std::move(net));
}

/// Distributed l1/l2-regularized logistic regression with class-conditional
/// Gaussian samples, same constraint structure as the regression experiment.
inline ProblemSpec generate_logistic_experiment(std::uint64_t seed,
                                                LogisticExperimentParams prm = {}) {
  Network net = random_geometric_network(prm.agents, prm.radius,
                                         Rng::derive(seed, stream::kTopology));
  std::vector<SubNetwork> subs = neighborhood_subnetworks(net);

  Rng data_rng(Rng::derive(seed, stream::kData));
  std::vector<CostFunction> costs;
  std::vector<Regularizer> regs;
  for (int k = 1; k <= prm.agents; ++k) {
    Matrix regressors(prm.samples, prm.dim);
    Vector labels(prm.samples);
    for (int t = 0; t < prm.samples; ++t) {
      const double label = t < prm.samples / 2 ? 1.0 : -1.0;
      for (int j = 0; j < prm.dim; ++j) regressors(t, j) = data_rng.normal(label, 1.0);
      labels(t) = label;
    }
    costs.push_back(CostFunction::logistic(std::move(regressors), std::move(labels), prm.l2));
    regs.push_back(Regularizer::l1(prm.dim, prm.l1));
  }

  Rng constraint_rng(Rng::derive(seed, stream::kConstraints));
  std::vector<int> dims(prm.agents, prm.dim);
  auto blocks = detail::gaussian_neighborhood_blocks(subs, dims, prm.constraint_rows,
                                                     constraint_rng);
  auto anchor = detail::gaussian_points(prm.agents, prm.dim, constraint_rng);
  blocks = feasible_rhs(std::move(blocks), anchor);
  return assemble_problem(std::move(costs), std::move(regs), blocks, std::move(net));
}

/// Two agents, scalar quadratics 0.5(w_k - c_k)^2 with c = (1, 3), one
/// shared constraint w_1 + w_2 = 2. Closed-form optimum (0, 2) with
/// multiplier 1; small enough to check by hand.
inline ProblemSpec make_two_agent_quadratic() {
  Network net = build_network(2, {{1, 2}});
  std::vector<CostFunction> costs;
  costs.push_back(CostFunction::quadratic(Matrix::Identity(1, 1), Vector::Constant(1, 1.0)));
  costs.push_back(CostFunction::quadratic(Matrix::Identity(1, 1), Vector::Constant(1, 3.0)));
  std::vector<Regularizer> regs{Regularizer::zero(1), Regularizer::zero(1)};
  std::vector<ConstraintBlock> blocks(2);
  for (int k = 1; k <= 2; ++k) {
    blocks[k - 1].constraint_id = 1;
    blocks[k - 1].agent_id = k;
    blocks[k - 1].coupling = Matrix::Identity(1, 1);
    blocks[k - 1].rhs = Vector::Constant(1, 1.0);
  }
  return assemble_problem(std::move(costs), std::move(regs), blocks, std::move(net));
}

}  // namespace dcd
