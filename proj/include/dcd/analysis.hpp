#pragma once

#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dcd/oracle.hpp"
#include "dcd/solver.hpp"

namespace dcd {

struct StepLimits {
  double mu_w_max = std::numeric_limits<double>::quiet_NaN();
  double mu_v_max = std::numeric_limits<double>::quiet_NaN();
  bool available = false;  // false when nu = 0: the dual bound needs strong convexity
};

/// The two exclusive step-size bounds that guarantee convergence:
/// mu_w < 1/(2 delta - nu) and mu_v < nu / lambda_max(B'B) for the lifted
/// coupling operator.
inline StepLimits step_size_limits(const SmoothnessParams& params,
                                   const LiftedProblem& lifted) {
  StepLimits lim;
  if (params.delta <= 0.0) return lim;
  lim.mu_w_max = 1.0 / (2.0 * params.delta - params.nu);
  if (params.nu > 0.0) {
    double smax = 0.0;
    if (lifted.coupling.size() > 0) {
      Eigen::BDCSVD<Matrix> svd(lifted.coupling);
      smax = svd.singularValues()(0);
    }
    lim.mu_v_max = smax > 0.0 ? params.nu / (smax * smax)
                              : std::numeric_limits<double>::infinity();
    lim.available = true;
  }
  return lim;
}

/// Linear-rate constants with the validity flags of every hypothesis they
/// rest on. The constants are always computed so reports can show them; the
/// bound is only a certificate when valid() holds.
struct RateBound {
  double alpha = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double one_minus_lambda_r = 0.0;
  double gamma = 0.0;
  double lambda_min_bbt = 0.0;  // smallest eigenvalue of B B'
  bool smooth_ok = false;       // every regularizer is zero
  bool full_row_rank_ok = false;
  bool nu_ok = false;
  bool theorem1_steps_ok = false;
  bool gamma_range_ok = false;  // gamma1 and gamma2 inside (0,1)

  bool valid() const {
    return smooth_ok && full_row_rank_ok && nu_ok && theorem1_steps_ok && gamma_range_ok;
  }
};

inline RateBound rate_bound(const ProblemSpec& p, const LiftedProblem& lifted,
                            const SpectralData& spectral, const StepSizes& steps) {
  const SmoothnessParams sp = smoothness_params(p);
  RateBound rb;
  rb.smooth_ok = p.smooth();
  rb.nu_ok = sp.nu > 0.0;

  Eigen::BDCSVD<Matrix> svd(lifted.coupling);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() == std::min(lifted.coupling.rows(), lifted.coupling.cols())
                          ? sv(sv.size() - 1)
                          : 0.0;
  // Full row rank of the lifted coupling is the same statement as full row
  // rank of every agent's stacked blocks.
  rb.full_row_rank_ok = lifted.coupling.rows() <= lifted.coupling.cols() &&
                        sv.size() > 0 && sv(sv.size() - 1) > 1e-10 * std::max(1.0, smax);
  rb.lambda_min_bbt = lifted.coupling.rows() <= lifted.coupling.cols() && sv.size() > 0
                          ? smin * smin
                          : 0.0;

  rb.theorem1_steps_ok = sp.nu > 0.0 && steps.mu_w < 1.0 / (2.0 * sp.delta - sp.nu) &&
                         (smax == 0.0 || steps.mu_v < sp.nu / (smax * smax));

  rb.alpha = 1.0 - steps.mu_w * (2.0 * sp.delta - sp.nu);
  rb.gamma1 = 1.0 - (steps.mu_w * sp.nu - rb.alpha * steps.mu_w * steps.mu_w * sp.delta * sp.delta);
  rb.gamma2 = 1.0 - 0.5 * rb.alpha * steps.mu_w * steps.mu_v * rb.lambda_min_bbt;
  rb.one_minus_lambda_r = 1.0 - spectral.lambda_r;
  rb.gamma = std::max({rb.gamma1, rb.gamma2, rb.one_minus_lambda_r});
  rb.gamma_range_ok = rb.gamma1 > 0.0 && rb.gamma1 < 1.0 && rb.gamma2 > 0.0 && rb.gamma2 < 1.0;
  return rb;
}

struct KKTResiduals {
  double stationarity = 0.0;  // dist(-grad J(w) - B'y, subdifferential of R at w)
  double consensus = 0.0;     // ||U1' y||
  double feasibility = 0.0;   // norm over constraints of the member sums
  Vector per_constraint;
};

inline KKTResiduals kkt_residuals(const Vector& w, const Vector& y, const ProblemSpec& p,
                                  const LiftedProblem& lifted, const SpectralData& spectral) {
  KKTResiduals r;
  const Vector target = -(p.stacked_gradient(w) + lifted.coupling.transpose() * y);
  r.stationarity = p.stacked_regularizer_distance(w, target);
  r.consensus = spectral.range_dim() > 0 ? (spectral.u1.transpose() * y).norm() : 0.0;
  r.per_constraint = constraint_residuals(p, w);
  r.feasibility = r.per_constraint.norm();
  return r;
}

/// Saddle triple the certificates measure against. y* replicates each
/// constraint's multiplier across its member copies; x* solves the corrected
/// stationarity condition by least squares on U1 Sigma, which is exact
/// whenever w* is feasible (the residual B w* - b is then orthogonal to the
/// consensus directions, i.e. inside range(U1)).
struct SaddleReference {
  Vector w, y, x;
};

inline SaddleReference make_saddle_reference(const ProblemSpec& p, const LiftedProblem& lifted,
                                             const SpectralData& spectral,
                                             const ReferenceSolution& ref) {
  SaddleReference s;
  s.w = p.stack(ref.w);
  s.y = Vector::Zero(lifted.dual_dim);
  for (int e = 1; e <= p.constraint_count(); ++e)
    for (int pos = 0; pos < p.subnetworks[e - 1].size; ++pos)
      s.y.segment(lifted.constraint_offsets[e - 1] + pos * p.block_rows[e - 1],
                  p.block_rows[e - 1]) = ref.multipliers[e - 1];
  if (spectral.range_dim() > 0) {
    const Vector residual = lifted.coupling * s.w - lifted.rhs;
    s.x = -(spectral.u1.transpose() * residual).cwiseQuotient(spectral.sigma);
  } else {
    s.x = Vector::Zero(0);
  }
  return s;
}

/// V = ||w*-w||^2 + mu_w ( (1/mu_v) ||y*-y||^2 + ||x*-x||^2_D ) with
/// D = mu_v (Sigma - Sigma^2). Non-increasing along any run whose steps obey
/// the convergence bounds.
inline double lyapunov(const StateSnapshot& state, const SaddleReference& ref,
                       const StepSizes& steps, const SpectralData& spectral) {
  const double primal = (ref.w - state.w).squaredNorm();
  const double dual = (ref.y - state.y).squaredNorm() / steps.mu_v;
  double range = 0.0;
  for (int j = 0; j < spectral.range_dim(); ++j) {
    const double s = spectral.sigma(j);
    const double diff = ref.x(j) - state.x(j);
    range += steps.mu_v * (s - s * s) * diff * diff;
  }
  return primal + steps.mu_w * (dual + range);
}

struct Lemma3Report {
  double inequality_lhs = 0.0;
  double inequality_rhs = 0.0;
  double inequality_slack = 0.0;   // rhs - lhs, must be >= -1e-9
  double equality_lhs = 0.0;
  double equality_rhs = 0.0;
  double equality_defect = 0.0;    // |lhs - rhs|
  double equality_defect_rel = 0.0;
};

/// Evaluates both consecutive-round certificates: the primal contraction
/// inequality and the dual-energy identity. The identity must hold to
/// round-off on every pair; the inequality slack must stay above -1e-9.
inline Lemma3Report verify_lemma3(const StateSnapshot& current, const StateSnapshot& previous,
                                  const SaddleReference& ref, const SmoothnessParams& params,
                                  const StepSizes& steps, const LiftedProblem& lifted,
                                  const SpectralData& spectral) {
  Lemma3Report rep;
  const Vector wt_cur = ref.w - current.w;
  const Vector wt_prev = ref.w - previous.w;
  const Vector dw = current.w - previous.w;
  const Vector coupled_dw = lifted.coupling * (current.w - ref.w);
  const double cross = 2.0 * (previous.y - ref.y).dot(coupled_dw);

  rep.inequality_lhs = wt_cur.squaredNorm() - wt_prev.squaredNorm();
  rep.inequality_rhs =
      -(1.0 - steps.mu_w * (2.0 * params.delta - params.nu)) * dw.squaredNorm() -
      steps.mu_w * params.nu * (wt_prev.squaredNorm() + wt_cur.squaredNorm()) -
      steps.mu_w * cross;
  rep.inequality_slack = rep.inequality_rhs - rep.inequality_lhs;

  const Vector yt_cur = ref.y - current.y;
  const Vector yt_prev = ref.y - previous.y;
  const Vector xt_cur = ref.x - current.x;
  const Vector xt_prev = ref.x - previous.x;
  const Vector dx = current.x - previous.x;
  auto d_norm2 = [&](const Vector& v) {
    double acc = 0.0;
    for (int j = 0; j < spectral.range_dim(); ++j) {
      const double s = spectral.sigma(j);
      acc += steps.mu_v * (s - s * s) * v(j) * v(j);
    }
    return acc;
  };
  const double sigma_xt = [&] {
    double acc = 0.0;
    for (int j = 0; j < spectral.range_dim(); ++j) {
      const double t = spectral.sigma(j) * xt_cur(j);
      acc += steps.mu_v * t * t;
    }
    return acc;
  }();

  rep.equality_lhs = (yt_cur.squaredNorm() - yt_prev.squaredNorm()) / steps.mu_v +
                     d_norm2(xt_cur) - d_norm2(xt_prev);
  rep.equality_rhs = -d_norm2(dx) - sigma_xt +
                     steps.mu_v * (lifted.coupling * wt_cur).squaredNorm() + cross;
  rep.equality_defect = std::abs(rep.equality_lhs - rep.equality_rhs);
  rep.equality_defect_rel =
      rep.equality_defect / (1.0 + std::abs(rep.equality_lhs) + std::abs(rep.equality_rhs));
  return rep;
}

struct LinearRateReport {
  bool applicable = false;
  std::string skip_reason;
  double gamma = 0.0;
  double initial_error = 0.0;  // C_0
  int checked = 0;
  int violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();  // min of bound - value
};

/// Checks the geometric envelope: weighted error at round i must stay below
/// gamma^i C_0. Skipped (with the reason) when any hypothesis flag is false.
inline LinearRateReport verify_linear_rate(std::span<const StateSnapshot> states,
                                           const SaddleReference& ref, const RateBound& rate,
                                           const StepSizes& steps,
                                           const SpectralData& spectral,
                                           double tolerance = 1e-9) {
  LinearRateReport rep;
  rep.gamma = rate.gamma;
  if (!rate.valid()) {
    rep.skip_reason = !rate.smooth_ok          ? "regularizers are not all zero"
                      : !rate.full_row_rank_ok ? "stacked coupling blocks lack full row rank"
                      : !rate.nu_ok            ? "cost is not strongly convex"
                      : !rate.theorem1_steps_ok
                          ? "steps violate the convergence bounds"
                          : "gamma constants fall outside (0,1)";
    return rep;
  }
  rep.applicable = true;

  auto weighted_error = [&](const StateSnapshot& st) {
    double acc = (ref.w - st.w).squaredNorm() +
                 steps.mu_w / steps.mu_v * (ref.y - st.y).squaredNorm();
    for (int j = 0; j < spectral.range_dim(); ++j) {
      const double diff = ref.x(j) - st.x(j);
      acc += steps.mu_w * steps.mu_v * spectral.sigma(j) * diff * diff;
    }
    return acc;
  };

  if (states.empty()) return rep;
  rep.initial_error = weighted_error(states[0]);
  double envelope = rep.initial_error;
  for (size_t i = 0; i < states.size(); ++i) {
    const double value = weighted_error(states[i]);
    const double bound = envelope * (1.0 + tolerance);
    rep.worst_margin = std::min(rep.worst_margin, bound - value);
    if (value > bound) ++rep.violations;
    ++rep.checked;
    envelope *= rate.gamma;
  }
  return rep;
}

struct RelativeError {
  double value = 0.0;
  bool absolute_fallback = false;  // some agent optimum has zero norm
};

/// (1/K) sum_k ||w_k - w*_k||^2 / ||w*_k||^2; falls back to the plain MSE
/// when an agent optimum is exactly zero.
inline RelativeError relative_error(const ProblemSpec& p, const Vector& w,
                                    const Vector& w_star) {
  if (w.size() != p.primal_dim() || w_star.size() != p.primal_dim())
    throw DimensionMismatch("relative_error expects stacked primal vectors");
  RelativeError out;
  for (int k = 1; k <= p.agent_count(); ++k)
    if (w_star.segment(p.agent_offset(k), p.agent_dim(k)).squaredNorm() == 0.0) {
      out.absolute_fallback = true;
      break;
    }
  double acc = 0.0;
  for (int k = 1; k <= p.agent_count(); ++k) {
    const double diff =
        (w.segment(p.agent_offset(k), p.agent_dim(k)) -
         w_star.segment(p.agent_offset(k), p.agent_dim(k)))
            .squaredNorm();
    acc += out.absolute_fallback
               ? diff
               : diff / w_star.segment(p.agent_offset(k), p.agent_dim(k)).squaredNorm();
  }
  out.value = acc / p.agent_count();
  return out;
}

/// Largest coordinate deviation between dual copies within any sub-network;
/// zero exactly when every constraint's copies agree.
inline double max_dual_deviation(const ProblemSpec& p, const LiftedProblem& lifted,
                                 const Vector& y) {
  double worst = 0.0;
  for (int e = 1; e <= p.constraint_count(); ++e) {
    const int rows = p.block_rows[e - 1];
    const int count = p.subnetworks[e - 1].size;
    for (int a = 0; a < count; ++a)
      for (int b = a + 1; b < count; ++b) {
        const Vector diff =
            y.segment(lifted.constraint_offsets[e - 1] + a * rows, rows) -
            y.segment(lifted.constraint_offsets[e - 1] + b * rows, rows);
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
      }
  }
  return worst;
}

}  // namespace dcd
