#pragma once

#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcd/combiners.hpp"
#include "dcd/problem.hpp"

namespace dcd {

struct StepSizes {
  double mu_w = 0.0;
  double mu_v = 0.0;
};

enum class SolverForm { Agent, Network, XForm };

// ---------------------------------------------------------------------------
// The same recursion in three equivalent representations. All three share
// round 0: a proximal gradient step from the initial point followed by the
// plain dual ascent update y_0 = y_{-1} + mu_v (B w_0 - b); the neighborhood
// combination enters from round 1 on. That shared round-0 convention is what
// makes the trajectories coincide exactly, and it also pins the anchor point
// (w_0, y_0, x_0 = 0) used by the convergence certificates.
// ---------------------------------------------------------------------------

/// Per-agent memory of the message-passing form: the primal iterate plus one
/// (v, psi) pair per constraint the agent participates in, aligned with the
/// agent's equality set.
struct AgentState {
  Vector w;
  std::vector<Vector> v;
  std::vector<Vector> psi;
};

using AgentStates = std::vector<AgentState>;

inline AgentStates make_initial_agent_states(const ProblemSpec& p) {
  AgentStates states(p.agent_count());
  for (int k = 1; k <= p.agent_count(); ++k) {
    AgentState& st = states[k - 1];
    st.w = Vector::Zero(p.agent_dim(k));
    for (int e : p.equality_sets[k - 1]) {
      st.v.push_back(Vector::Zero(p.block_rows[e - 1]));
      st.psi.push_back(Vector::Zero(p.block_rows[e - 1]));
    }
  }
  return states;
}

/// One synchronous round of the per-agent recursion. Every read is taken
/// from the round i-1 snapshot, so the agent processing order cannot change
/// the result; `order` exists to let tests demonstrate exactly that.
/// Round 0 applies the dual gradient step without the combination.
inline void agent_round(const ProblemSpec& p, const std::vector<CombinationMatrix>& combos,
                        const StepSizes& steps, int round, AgentStates& states,
                        const std::vector<int>* order = nullptr) {
  const AgentStates prev = states;
  std::vector<int> natural;
  if (!order) {
    natural.resize(p.agent_count());
    for (int k = 1; k <= p.agent_count(); ++k) natural[k - 1] = k;
  }
  const std::vector<int>& schedule = order ? *order : natural;

  // (a) proximal primal step against the previous dual copies
  for (int k : schedule) {
    const AgentState& pk = prev[k - 1];
    Vector pull = p.costs[k - 1].gradient(pk.w);
    const auto& eset = p.equality_sets[k - 1];
    for (size_t i = 0; i < eset.size(); ++i)
      pull += p.block(eset[i], k).coupling.transpose() * pk.v[i];
    states[k - 1].w = p.regularizers[k - 1].prox(steps.mu_w, pk.w - steps.mu_w * pull);
  }

  // (b) dual gradient step and (c) correction, per constraint copy
  std::vector<std::vector<Vector>> phi(p.agent_count());
  for (int k : schedule) {
    const auto& eset = p.equality_sets[k - 1];
    phi[k - 1].resize(eset.size());
    for (size_t i = 0; i < eset.size(); ++i) {
      const ConstraintBlock& blk = p.block(eset[i], k);
      states[k - 1].psi[i] =
          prev[k - 1].v[i] + steps.mu_v * (blk.coupling * states[k - 1].w - blk.rhs);
      phi[k - 1][i] = states[k - 1].psi[i] + prev[k - 1].v[i] - prev[k - 1].psi[i];
    }
  }

  // (d) combination over involved neighbors; round 0 keeps phi as-is
  for (int k : schedule) {
    const auto& eset = p.equality_sets[k - 1];
    for (size_t i = 0; i < eset.size(); ++i) {
      const int e = eset[i];
      if (round == 0) {
        states[k - 1].v[i] = phi[k - 1][i];
        continue;
      }
      const SubNetwork& sub = p.subnetworks[e - 1];
      const Matrix& averaged = combos[e - 1].averaged;
      const int col = sub.position(k);
      Vector mixed = Vector::Zero(p.block_rows[e - 1]);
      for (int pos = 0; pos < sub.size; ++pos) {
        const double weight = averaged(pos, col);
        if (weight == 0.0) continue;
        const int s = sub.members[pos];
        mixed += weight * phi[s - 1][p.equality_index(s, e)];
      }
      states[k - 1].v[i] = mixed;
    }
  }
}

/// Stacks the agents' dual copies in the network layout (constraint by
/// constraint, members ascending).
inline Vector stack_agent_duals(const ProblemSpec& p, const LiftedProblem& lifted,
                                const AgentStates& states) {
  Vector y(lifted.dual_dim);
  for (int e = 1; e <= p.constraint_count(); ++e) {
    const SubNetwork& sub = p.subnetworks[e - 1];
    for (int pos = 0; pos < sub.size; ++pos) {
      const int s = sub.members[pos];
      y.segment(lifted.constraint_offsets[e - 1] + pos * p.block_rows[e - 1],
                p.block_rows[e - 1]) = states[s - 1].v[p.equality_index(s, e)];
    }
  }
  return y;
}

inline Vector stack_agent_primal(const ProblemSpec& p, const AgentStates& states) {
  Vector w(p.primal_dim());
  for (int k = 1; k <= p.agent_count(); ++k)
    w.segment(p.agent_offset(k), p.agent_dim(k)) = states[k - 1].w;
  return w;
}

/// Stacked two-step form: keeps y at rounds i-1 and i-2.
struct NetworkState {
  Vector w;       // w_{i-1}
  Vector y;       // y_{i-1}
  Vector y_prev;  // y_{i-2}
};

inline NetworkState make_initial_network_state(const ProblemSpec& p,
                                               const LiftedProblem& lifted) {
  NetworkState st;
  st.w = Vector::Zero(p.primal_dim());
  st.y = Vector::Zero(lifted.dual_dim);
  st.y_prev = Vector::Zero(lifted.dual_dim);
  return st;
}

inline void network_round(const ProblemSpec& p, const LiftedProblem& lifted,
                          const Matrix& averaged_mixing, const StepSizes& steps, int round,
                          NetworkState& st) {
  const Vector z =
      st.w - steps.mu_w * (p.stacked_gradient(st.w) + lifted.coupling.transpose() * st.y);
  const Vector w_next = p.stacked_prox(steps.mu_w, z);
  Vector y_next;
  if (round == 0) {
    y_next = st.y + steps.mu_v * (lifted.coupling * w_next - lifted.rhs);
  } else {
    y_next = averaged_mixing *
             (2.0 * st.y - st.y_prev + steps.mu_v * (lifted.coupling * (w_next - st.w)));
  }
  st.y_prev = st.y;
  st.y = y_next;
  st.w = w_next;
}

/// Corrected dual ascent driven by the range coordinates x (dimension r).
struct XFormState {
  Vector w;
  Vector y;
  Vector x;
};

inline XFormState make_initial_xform_state(const ProblemSpec& p, const LiftedProblem& lifted,
                                           const SpectralData& spectral) {
  XFormState st;
  st.w = Vector::Zero(p.primal_dim());
  st.y = Vector::Zero(lifted.dual_dim);
  st.x = Vector::Zero(spectral.range_dim());
  return st;
}

inline void xform_round(const ProblemSpec& p, const LiftedProblem& lifted,
                        const SpectralData& spectral, const StepSizes& steps, int round,
                        XFormState& st) {
  const Vector z =
      st.w - steps.mu_w * (p.stacked_gradient(st.w) + lifted.coupling.transpose() * st.y);
  const Vector w_next = p.stacked_prox(steps.mu_w, z);
  const Vector ascent = st.y + steps.mu_v * (lifted.coupling * w_next - lifted.rhs);
  if (round == 0) {
    st.y = ascent;  // x_0 stays zero
  } else {
    const Vector bracket =
        ascent + steps.mu_v * (spectral.u1 * spectral.sigma.cwiseProduct(st.x));
    st.x -= spectral.u1.transpose() * bracket / steps.mu_v;
    st.y = ascent + steps.mu_v * (spectral.u1 * spectral.sigma.cwiseProduct(st.x));
  }
  st.w = w_next;
}

/// Scalars exchanged per synchronous round: each agent sends its corrected
/// dual vector for constraint e to the involved neighbors once.
inline double communication_cost(const ProblemSpec& p) {
  double total = 0.0;
  for (int k = 1; k <= p.agent_count(); ++k)
    for (int e : p.equality_sets[k - 1]) {
      int involved_neighbors = 0;
      for (int s : p.network.neighborhood(k))
        if (s != k && p.subnetworks[e - 1].contains(s)) ++involved_neighbors;
      total += static_cast<double>(p.block_rows[e - 1]) * involved_neighbors;
    }
  return total;
}

/// Rewrites the instance as one constraint over the whole network: per agent,
/// the blocks of all constraints are stacked vertically with zero rows where
/// the agent is not involved. Same feasible set and costs, so the optimum is
/// unchanged; only the structure information is discarded. The baseline that
/// ignores sparsity is this transform followed by the ordinary solver.
inline ProblemSpec flatten_to_single_constraint(const ProblemSpec& p) {
  if (!is_connected(p.network))
    throw DisconnectedSubnetwork("flattening requires a connected network");
  int total_rows = 0;
  for (int s : p.block_rows) total_rows += s;
  std::vector<int> row_offsets(p.constraint_count() + 1, 0);
  for (int e = 1; e <= p.constraint_count(); ++e)
    row_offsets[e] = row_offsets[e - 1] + p.block_rows[e - 1];

  std::vector<ConstraintBlock> blocks;
  for (int k = 1; k <= p.agent_count(); ++k) {
    ConstraintBlock blk;
    blk.constraint_id = 1;
    blk.agent_id = k;
    blk.coupling = Matrix::Zero(total_rows, p.agent_dim(k));
    blk.rhs = Vector::Zero(total_rows);
    for (int e : p.equality_sets[k - 1]) {
      const ConstraintBlock& src = p.block(e, k);
      blk.coupling.block(row_offsets[e - 1], 0, p.block_rows[e - 1], p.agent_dim(k)) =
          src.coupling;
      blk.rhs.segment(row_offsets[e - 1], p.block_rows[e - 1]) = src.rhs;
    }
    blocks.push_back(std::move(blk));
  }
  return assemble_problem(p.costs, p.regularizers, blocks, p.network);
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

struct TraceRecord {
  int round = 0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
  double constraint_residual = 0.0;
  double consensus_residual = std::numeric_limits<double>::quiet_NaN();
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double comm_scalars = 0.0;  // per round
};

struct Trace {
  std::vector<TraceRecord> records;
};

/// Stacked view of one completed round: primal, dual copies, and the range
/// coordinates of the corrected ascent (reconstructed from y when the run
/// uses a form that does not carry them).
struct StateSnapshot {
  Vector w, y, x;
};

struct RunHooks {
  std::function<double(const Vector& w)> relative_error;
  std::function<double(const StateSnapshot&)> lyapunov;
};

struct RunOptions {
  SolverForm form = SolverForm::Agent;
  int rounds = 0;
  int metrics_stride = 1;        // metric rows recorded every stride rounds (plus the last)
  bool record_states = false;
  bool compute_consensus = true;
  double divergence_norm = 1e12;
};

struct RunResult {
  Trace trace;
  StateSnapshot final_state;
  std::vector<StateSnapshot> states;  // one per round when record_states
  std::vector<Vector> final_primal;   // per agent
  bool diverged = false;
  std::string diagnostic;
  int completed_rounds = 0;
};

namespace detail {

inline Vector reconstruct_range_coords(const SpectralData& spectral, const StepSizes& steps,
                                       const LiftedProblem& lifted, const Vector& w,
                                       const Vector& y, const Vector& y_prev) {
  // mu_v U1 Sigma x_i = y_i - y_{i-1} - mu_v (B w_i - b), rearranged.
  if (spectral.range_dim() == 0) return Vector::Zero(0);
  const Vector residual = y - y_prev - steps.mu_v * (lifted.coupling * w - lifted.rhs);
  return (spectral.u1.transpose() * residual).cwiseQuotient(spectral.sigma) / steps.mu_v;
}

inline std::string divergence_diagnostic(const ProblemSpec& p, const LiftedProblem& lifted,
                                         const StepSizes& steps, int round) {
  const SmoothnessParams sp = smoothness_params(p);
  std::string msg = "iterate diverged at round " + std::to_string(round) + ";";
  const double mu_w_max = 1.0 / (2.0 * sp.delta - sp.nu);
  msg += " primal step " + std::to_string(steps.mu_w) +
         (steps.mu_w < mu_w_max ? " satisfies" : " violates") + " the bound 1/(2*delta-nu)=" +
         std::to_string(mu_w_max) + ";";
  if (sp.nu > 0.0) {
    Eigen::BDCSVD<Matrix> svd(lifted.coupling);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    const double mu_v_max = smax > 0.0 ? sp.nu / (smax * smax)
                                       : std::numeric_limits<double>::infinity();
    msg += " dual step " + std::to_string(steps.mu_v) +
           (steps.mu_v < mu_v_max ? " satisfies" : " violates") +
           " the bound nu/lambda_max(B'B)=" + std::to_string(mu_v_max);
  } else {
    msg += " dual step bound unavailable (nu = 0)";
  }
  return msg;
}

}  // namespace detail

/// Executes the chosen form for `rounds` synchronous rounds and records the
/// per-round metrics. Runs are deterministic: identical inputs produce an
/// identical trace.
inline RunResult run(const ProblemSpec& p, const std::vector<CombinationMatrix>& combos,
                     const SpectralData& spectral, const StepSizes& steps,
                     const RunOptions& options, const RunHooks& hooks = {}) {
  if (steps.mu_w <= 0.0 || steps.mu_v <= 0.0) throw Error("step sizes must be positive");
  if (options.rounds < 0) throw Error("round count must be non-negative");
  if (static_cast<int>(combos.size()) != p.constraint_count())
    throw DimensionMismatch("one combination matrix required per constraint");

  const LiftedProblem lifted = lift(p);
  const double comm = communication_cost(p);

  RunResult result;
  AgentStates agent_states;
  NetworkState network_state;
  XFormState xform_state;
  switch (options.form) {
    case SolverForm::Agent:
      agent_states = make_initial_agent_states(p);
      break;
    case SolverForm::Network:
      network_state = make_initial_network_state(p, lifted);
      break;
    case SolverForm::XForm:
      xform_state = make_initial_xform_state(p, lifted, spectral);
      break;
  }

  Vector y_before = Vector::Zero(lifted.dual_dim);  // y_{i-1} for reconstruction
  for (int round = 0; round < options.rounds; ++round) {
    StateSnapshot snap;
    switch (options.form) {
      case SolverForm::Agent:
        agent_round(p, combos, steps, round, agent_states);
        snap.w = stack_agent_primal(p, agent_states);
        snap.y = stack_agent_duals(p, lifted, agent_states);
        break;
      case SolverForm::Network:
        network_round(p, lifted, spectral.averaged_mixing, steps, round, network_state);
        snap.w = network_state.w;
        snap.y = network_state.y;
        break;
      case SolverForm::XForm:
        xform_round(p, lifted, spectral, steps, round, xform_state);
        snap.w = xform_state.w;
        snap.y = xform_state.y;
        break;
    }

    if (!snap.w.allFinite() || !snap.y.allFinite() ||
        snap.w.norm() > options.divergence_norm || snap.y.norm() > options.divergence_norm) {
      result.diverged = true;
      result.diagnostic = detail::divergence_diagnostic(p, lifted, steps, round);
      result.completed_rounds = round;
      return result;
    }

    const bool record_metrics =
        round % options.metrics_stride == 0 || round == options.rounds - 1;
    const bool need_x = options.record_states ||
                        (record_metrics && static_cast<bool>(hooks.lyapunov));
    if (need_x) {
      snap.x = options.form == SolverForm::XForm
                   ? xform_state.x
                   : detail::reconstruct_range_coords(spectral, steps, lifted, snap.w,
                                                      snap.y, y_before);
    }
    if (record_metrics) {
      TraceRecord rec;
      rec.round = round;
      rec.comm_scalars = comm;
      rec.constraint_residual = constraint_residuals(p, snap.w).norm();
      if (options.compute_consensus && spectral.range_dim() > 0)
        rec.consensus_residual = (spectral.u1.transpose() * snap.y).norm();
      else if (options.compute_consensus)
        rec.consensus_residual = 0.0;
      if (hooks.relative_error) rec.rel_error = hooks.relative_error(snap.w);
      if (hooks.lyapunov) rec.lyapunov = hooks.lyapunov(snap);
      result.trace.records.push_back(rec);
    }
    y_before = snap.y;
    if (options.record_states) result.states.push_back(snap);
    if (round == options.rounds - 1) result.final_state = std::move(snap);
  }

  result.completed_rounds = options.rounds;
  if (options.rounds > 0) {
    result.final_primal = p.unstack(result.final_state.w);
  } else {
    switch (options.form) {
      case SolverForm::Agent:
        result.final_state.w = stack_agent_primal(p, agent_states);
        result.final_state.y = stack_agent_duals(p, lifted, agent_states);
        break;
      case SolverForm::Network:
        result.final_state.w = network_state.w;
        result.final_state.y = network_state.y;
        break;
      case SolverForm::XForm:
        result.final_state.w = xform_state.w;
        result.final_state.y = xform_state.y;
        break;
    }
    result.final_state.x = Vector::Zero(spectral.range_dim());
    result.final_primal = p.unstack(result.final_state.w);
  }
  return result;
}

}  // namespace dcd
