#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>
#include <optional>
#include <string>
#include <vector>

#include "dcd/problem.hpp"

namespace dcd {

/// Centralized solution used to judge distributed runs. `multipliers[e-1]`
/// is the optimal dual vector of constraint e (shared by all its members).
struct ReferenceSolution {
  std::vector<Vector> w;
  std::vector<Vector> multipliers;
  double tolerance = 0.0;  // achieved max of stationarity / feasibility residuals
  std::string method;      // "kkt-linear" | "centralized-prox"
  bool dual_unique = true;
};

inline Vector stack_reference(const ProblemSpec& p, const ReferenceSolution& ref) {
  return p.stack(ref.w);
}

namespace detail {

inline double stationarity_distance(const ProblemSpec& p, const AggregatedConstraint& agg,
                                    const Vector& w, const Vector& v) {
  const Vector target = -(p.stacked_gradient(w) + agg.coupling.transpose() * v);
  return p.stacked_regularizer_distance(w, target);
}

inline ReferenceSolution pack_reference(const ProblemSpec& p, const AggregatedConstraint& agg,
                                        const Vector& w, const Vector& v,
                                        const std::string& method, bool dual_unique) {
  ReferenceSolution ref;
  ref.w = p.unstack(w);
  for (int e = 1; e <= p.constraint_count(); ++e)
    ref.multipliers.push_back(v.segment(agg.offsets[e - 1], p.block_rows[e - 1]));
  ref.tolerance = std::max(stationarity_distance(p, agg, w, v),
                           agg.rhs.size() ? (agg.coupling * w - agg.rhs).norm() : 0.0);
  ref.method = method;
  ref.dual_unique = dual_unique;
  return ref;
}

}  // namespace detail

/// Direct saddle-point solve for smooth quadratic instances: eliminates the
/// primal block through the cost Hessian and solves the multiplier system
/// B H^{-1} B' v = B H^{-1} c - b. A rank-deficient multiplier system is not
/// an error; the minimum-norm multiplier is returned with dual_unique=false.
inline ReferenceSolution kkt_solve_quadratic(const ProblemSpec& p) {
  for (auto& c : p.costs)
    if (c.kind() != CostKind::QuadraticLeastSquares)
      throw Error("kkt_solve_quadratic requires quadratic costs");
  if (!p.smooth()) throw Error("kkt_solve_quadratic requires zero regularizers");

  const int n = p.primal_dim();
  Matrix hess = Matrix::Zero(n, n);
  Vector lin = Vector::Zero(n);
  for (int k = 1; k <= p.agent_count(); ++k) {
    hess.block(p.agent_offset(k), p.agent_offset(k), p.agent_dim(k), p.agent_dim(k)) =
        p.costs[k - 1].quadratic_hessian();
    lin.segment(p.agent_offset(k), p.agent_dim(k)) = p.costs[k - 1].quadratic_linear();
  }
  Eigen::LLT<Matrix> llt(hess);
  if (llt.info() != Eigen::Success)
    throw Error("kkt_solve_quadratic requires strongly convex costs");

  AggregatedConstraint agg = aggregated_constraint(p);
  const int m = static_cast<int>(agg.rhs.size());
  if (m == 0) {
    const Vector w = llt.solve(lin);
    return detail::pack_reference(p, agg, w, Vector::Zero(0), "kkt-linear", true);
  }

  const Matrix hinv_bt = llt.solve(agg.coupling.transpose());
  const Vector hinv_c = llt.solve(lin);
  const Matrix schur = agg.coupling * hinv_bt;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(schur);
  const bool dual_unique = cod.rank() == m;
  const Vector v = cod.solve(agg.coupling * hinv_c - agg.rhs);
  const Vector w = hinv_c - hinv_bt * v;

  const double residual = std::max((hess * w - lin + agg.coupling.transpose() * v).norm(),
                                   (agg.coupling * w - agg.rhs).norm());
  if (residual > 1e-10 * (1.0 + lin.norm() + agg.rhs.norm()))
    throw Error("KKT solve residual too large; constraints may be infeasible");
  return detail::pack_reference(p, agg, w, v, "kkt-linear", dual_unique);
}

namespace detail {

// Closed-form proximal maps local to the reference solver. The distributed
// solver path never calls these, which keeps the two sides of every
// cross-check independent.
inline Vector oracle_prox(const Regularizer& reg, double step, const Vector& x) {
  Vector out(x.size());
  switch (reg.kind()) {
    case RegKind::Zero:
      return x;
    case RegKind::L1:
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double t = step * reg.l1_weight();
        out(j) = x(j) > t ? x(j) - t : (x(j) < -t ? x(j) + t : 0.0);
      }
      return out;
    case RegKind::SquaredL2:
      return x / (1.0 + step * reg.l2_weight());
    case RegKind::ElasticNet:
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double t = step * reg.l1_weight();
        const double s = x(j) > t ? x(j) - t : (x(j) < -t ? x(j) + t : 0.0);
        out(j) = s / (1.0 + step * reg.l2_weight());
      }
      return out;
    case RegKind::Box:
      for (Eigen::Index j = 0; j < x.size(); ++j)
        out(j) = std::min(std::max(x(j), reg.lower()), reg.upper());
      return out;
  }
  throw Error("unreachable");
}

inline Vector oracle_prox_all(const ProblemSpec& p, double step, const Vector& x) {
  Vector out(p.primal_dim());
  for (int k = 1; k <= p.agent_count(); ++k)
    out.segment(p.agent_offset(k), p.agent_dim(k)) = oracle_prox(
        p.regularizers[k - 1], step, x.segment(p.agent_offset(k), p.agent_dim(k)));
  return out;
}

struct PolishPlan {
  std::vector<char> free_mask;   // per coordinate
  Vector pinned_values;          // value at pinned coordinates
  Vector l1_sign;                // sign weights applied on free coordinates
  Vector l2_diag;                // smooth quadratic regularizer added per coordinate
};

inline PolishPlan make_polish_plan(const ProblemSpec& p, const Vector& w_approx) {
  PolishPlan plan;
  const int n = p.primal_dim();
  plan.free_mask.assign(n, 1);
  plan.pinned_values = Vector::Zero(n);
  plan.l1_sign = Vector::Zero(n);
  plan.l2_diag = Vector::Zero(n);
  const double support_tol = 1e-6 * std::max(1.0, w_approx.cwiseAbs().maxCoeff());
  for (int k = 1; k <= p.agent_count(); ++k) {
    const Regularizer& reg = p.regularizers[k - 1];
    for (int j = 0; j < p.agent_dim(k); ++j) {
      const int idx = p.agent_offset(k) + j;
      const double wj = w_approx(idx);
      switch (reg.kind()) {
        case RegKind::Zero:
          break;
        case RegKind::SquaredL2:
          plan.l2_diag(idx) = reg.l2_weight();
          break;
        case RegKind::L1:
        case RegKind::ElasticNet:
          plan.l2_diag(idx) = reg.l2_weight();
          if (std::abs(wj) <= support_tol) {
            plan.free_mask[idx] = 0;
          } else {
            plan.l1_sign(idx) = reg.l1_weight() * (wj > 0.0 ? 1.0 : -1.0);
          }
          break;
        case RegKind::Box: {
          const double margin =
              support_tol * std::max(1.0, std::abs(reg.upper() - reg.lower()));
          if (wj <= reg.lower() + margin) {
            plan.free_mask[idx] = 0;
            plan.pinned_values(idx) = reg.lower();
          } else if (wj >= reg.upper() - margin) {
            plan.free_mask[idx] = 0;
            plan.pinned_values(idx) = reg.upper();
          }
          break;
        }
      }
    }
  }
  return plan;
}

/// Newton refinement of the active-set problem implied by `plan`. Returns
/// the refined (w, v) on success; the caller re-validates against the full
/// optimality system before trusting it.
inline std::optional<std::pair<Vector, Vector>> polish(const ProblemSpec& p,
                                                       const AggregatedConstraint& agg,
                                                       const PolishPlan& plan,
                                                       const Vector& w_start) {
  const int n = p.primal_dim();
  const int m = static_cast<int>(agg.rhs.size());
  std::vector<int> free_idx;
  for (int j = 0; j < n; ++j)
    if (plan.free_mask[j]) free_idx.push_back(j);
  const int f = static_cast<int>(free_idx.size());

  if (f == 0) return std::nullopt;

  Vector w = plan.pinned_values;
  for (int j : free_idx) w(j) = w_start(j);

  Matrix bf(m, f);
  for (int c = 0; c < f; ++c) bf.col(c) = agg.coupling.col(free_idx[c]);

  Vector v = Vector::Zero(m);
  for (int iter = 0; iter < 60; ++iter) {
    Vector grad = p.stacked_gradient(w) + plan.l2_diag.asDiagonal() * w + plan.l1_sign;

    Matrix hess = Matrix::Zero(n, n);
    for (int k = 1; k <= p.agent_count(); ++k)
      hess.block(p.agent_offset(k), p.agent_offset(k), p.agent_dim(k), p.agent_dim(k)) =
          p.costs[k - 1].hessian(w.segment(p.agent_offset(k), p.agent_dim(k)));

    Matrix kkt = Matrix::Zero(f + m, f + m);
    for (int r = 0; r < f; ++r)
      for (int c = 0; c < f; ++c) kkt(r, c) = hess(free_idx[r], free_idx[c]);
    for (int c = 0; c < f; ++c) kkt(c, c) += plan.l2_diag(free_idx[c]);
    if (m > 0) {
      kkt.topRightCorner(f, m) = bf.transpose();
      kkt.bottomLeftCorner(m, f) = bf;
    }
    Vector rhs(f + m);
    for (int c = 0; c < f; ++c) rhs(c) = -grad(free_idx[c]);
    if (m > 0) rhs.tail(m) = -(agg.coupling * w - agg.rhs);

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    const Vector sol = cod.solve(rhs);
    for (int c = 0; c < f; ++c) w(free_idx[c]) += sol(c);
    v = sol.tail(m);  // full multiplier solve, not an increment

    Vector grad_new = p.stacked_gradient(w) + plan.l2_diag.asDiagonal() * w + plan.l1_sign;
    double stat = 0.0;
    if (m > 0) {
      const Vector lifted = bf.transpose() * v;
      for (int c = 0; c < f; ++c)
        stat = std::max(stat, std::abs(grad_new(free_idx[c]) + lifted(c)));
    } else {
      for (int c = 0; c < f; ++c) stat = std::max(stat, std::abs(grad_new(free_idx[c])));
    }
    const double fe = m > 0 ? (agg.coupling * w - agg.rhs).norm() : 0.0;
    if (std::max(stat, fe) <= 1e-13 * (1.0 + agg.rhs.norm())) break;
  }
  return std::make_pair(w, v);
}

}  // namespace detail

/// First-order centralized solve for general instances: a primal-dual
/// proximal iteration on the aggregated single-constraint form, tightened by
/// active-set Newton refinement once the iterate is near the solution. Every
/// candidate is re-validated against the full optimality system, so an
/// accepted solution meets `tol` regardless of which phase produced it.
/// Shares no recursion code with the distributed solver.
inline ReferenceSolution centralized_prox_solve(const ProblemSpec& p, double tol = 1e-10,
                                                long max_iterations = 500000) {
  const SmoothnessParams params = smoothness_params(p);
  AggregatedConstraint agg = aggregated_constraint(p);
  const int m = static_cast<int>(agg.rhs.size());

  bool dual_unique = true;
  if (m > 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(agg.coupling);
    dual_unique = cod.rank() == m;
  }

  double op_norm = 0.0;
  if (m > 0) {
    Eigen::BDCSVD<Matrix> svd(agg.coupling);
    op_norm = svd.singularValues()(0);
  }
  const double sigma = m > 0 ? 1.0 / std::max(op_norm, 1e-12) : 0.0;
  const double tau = 0.9 / (0.5 * params.delta + sigma * op_norm * op_norm + 1e-12);

  Vector w = Vector::Zero(p.primal_dim());
  Vector v = Vector::Zero(m);
  double polish_trigger = 1e-3;

  auto residual = [&](const Vector& wc, const Vector& vc) {
    const double stat = detail::stationarity_distance(p, agg, wc, vc);
    const double feas = m > 0 ? (agg.coupling * wc - agg.rhs).norm() : 0.0;
    return std::max(stat, feas);
  };

  for (long iter = 0; iter < max_iterations; ++iter) {
    Vector descent = w - tau * p.stacked_gradient(w);
    if (m > 0) descent -= tau * (agg.coupling.transpose() * v);
    const Vector w_next = detail::oracle_prox_all(p, tau, descent);
    if (m > 0) v += sigma * (agg.coupling * (2.0 * w_next - w) - agg.rhs);
    w = w_next;

    if (iter % 50 != 49) continue;
    const double res = residual(w, v);
    if (res <= tol)
      return detail::pack_reference(p, agg, w, v, "centralized-prox", dual_unique);
    if (res <= polish_trigger) {
      const auto plan = detail::make_polish_plan(p, w);
      if (auto refined = detail::polish(p, agg, plan, w)) {
        if (residual(refined->first, refined->second) <= tol)
          return detail::pack_reference(p, agg, refined->first, refined->second,
                                        "centralized-prox", dual_unique);
      }
      polish_trigger /= 10.0;  // active set not settled yet
    }
  }
  throw NoConvergence("centralized reference solve did not reach tolerance " +
                      std::to_string(tol));
}

}  // namespace dcd
