#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include "dcd/analysis.hpp"
#include "dcd/io.hpp"

namespace dcd {

// Exit codes shared by the library-level runner and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitOracle = 4;

struct Preset {
  std::string name;
  std::string description;
  StepSizes default_steps;
  int default_rounds = 0;
  std::function<ProblemSpec(std::uint64_t seed)> build;
};

/// Named experiment generators with their hand-tuned default step sizes.
inline const std::vector<Preset>& preset_registry() {
  static const std::vector<Preset> registry = [] {
    std::vector<Preset> r;
    r.push_back({"two-agent-quadratic",
                 "two scalar quadratics coupled by w1 + w2 = 2; closed-form optimum (0, 2)",
                 {0.1, 0.1},
                 5000,
                 [](std::uint64_t) { return make_two_agent_quadratic(); }});
    r.push_back({"regression-sec6",
                 "sparse linear regression, K=20 geometric graph (d=0.3), neighborhood "
                 "constraints, Q=10, S=3, T=1000, l1=0.3",
                 {0.28, 0.28},
                 20000,
                 [](std::uint64_t seed) { return generate_regression_experiment(seed); }});
    r.push_back({"logistic-sec6",
                 "l1/l2 logistic regression, K=20 geometric graph (d=0.3), neighborhood "
                 "constraints, Q=5, S=3, T=1000, l1=l2=0.1",
                 {0.2, 0.2},
                 20000,
                 [](std::uint64_t seed) { return generate_logistic_experiment(seed); }});
    return r;
  }();
  return registry;
}

inline const Preset* find_preset(const std::string& name) {
  for (auto& p : preset_registry())
    if (p.name == name) return &p;
  return nullptr;
}

struct VariantConfig {
  std::string name = "default";
  bool flatten = false;
  std::optional<StepSizes> steps;
  std::optional<SolverForm> form;
  std::optional<int> rounds;
};

struct ExperimentConfig {
  std::string preset;                 // empty when inline_problem is set
  std::uint64_t seed = 0;
  std::optional<json> inline_problem;
  std::filesystem::path base_dir;     // resolves relative data files

  std::optional<StepSizes> steps;     // unset -> preset default -> auto
  bool auto_steps = false;
  std::optional<int> rounds;
  SolverForm form = SolverForm::Agent;
  bool all_forms = false;
  std::filesystem::path out_dir = "out";
  int metrics_stride = 1;
  double oracle_tolerance = 1e-10;
  bool oracle_cache = true;
  bool dump_matrices = false;
  std::vector<VariantConfig> variants;
  std::vector<double> thresholds = {1e-2, 1e-4, 1e-6};
};

inline SolverForm form_from_string(const std::string& s) {
  if (s == "agent") return SolverForm::Agent;
  if (s == "network") return SolverForm::Network;
  if (s == "xform") return SolverForm::XForm;
  throw ConfigError("unknown solver form: " + s);
}

inline std::string form_to_string(SolverForm f) {
  switch (f) {
    case SolverForm::Agent: return "agent";
    case SolverForm::Network: return "network";
    case SolverForm::XForm: return "xform";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

inline StepSizes steps_from_json(const json& j) {
  if (!j.contains("mu_w") || !j.contains("mu_v"))
    throw ConfigError("steps need 'mu_w' and 'mu_v'");
  StepSizes s{j.at("mu_w").get<double>(), j.at("mu_v").get<double>()};
  if (s.mu_w <= 0.0 || s.mu_v <= 0.0) throw ConfigError("steps must be positive");
  return s;
}

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  if (!j.contains("problem")) throw ConfigError("config needs a 'problem' object");
  const json& prob = j.at("problem");
  if (prob.contains("preset")) {
    cfg.preset = prob.at("preset").get<std::string>();
    if (!find_preset(cfg.preset)) throw ConfigError("unknown preset: " + cfg.preset);
  } else if (prob.contains("inline")) {
    cfg.inline_problem = prob.at("inline");
  } else {
    throw ConfigError("'problem' needs either 'preset' or 'inline'");
  }
  if (prob.contains("seed")) cfg.seed = prob.at("seed").get<std::uint64_t>();

  if (j.contains("steps")) {
    if (j.at("steps").is_string()) {
      if (j.at("steps").get<std::string>() != "auto")
        throw ConfigError("'steps' must be an object or \"auto\"");
      cfg.auto_steps = true;
    } else {
      cfg.steps = steps_from_json(j.at("steps"));
    }
  }
  if (j.contains("rounds")) {
    cfg.rounds = j.at("rounds").get<int>();
    if (*cfg.rounds < 0) throw ConfigError("rounds must be non-negative");
  }
  if (j.contains("form")) {
    const std::string f = j.at("form").get<std::string>();
    if (f == "all")
      cfg.all_forms = true;
    else
      cfg.form = form_from_string(f);
  }
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  if (j.contains("metrics_stride")) {
    cfg.metrics_stride = j.at("metrics_stride").get<int>();
    if (cfg.metrics_stride < 1) throw ConfigError("metrics_stride must be >= 1");
  }
  if (j.contains("oracle")) {
    if (j.at("oracle").contains("tol"))
      cfg.oracle_tolerance = j.at("oracle").at("tol").get<double>();
    if (j.at("oracle").contains("cache"))
      cfg.oracle_cache = j.at("oracle").at("cache").get<bool>();
  }
  if (j.contains("dump_matrices")) cfg.dump_matrices = j.at("dump_matrices").get<bool>();
  if (j.contains("thresholds")) {
    cfg.thresholds.clear();
    for (auto& t : j.at("thresholds")) cfg.thresholds.push_back(t.get<double>());
  }
  if (j.contains("variants")) {
    for (auto& vj : j.at("variants")) {
      VariantConfig v;
      v.name = vj.at("name").get<std::string>();
      if (vj.contains("flatten")) v.flatten = vj.at("flatten").get<bool>();
      if (vj.contains("steps")) v.steps = steps_from_json(vj.at("steps"));
      if (vj.contains("form")) v.form = form_from_string(vj.at("form").get<std::string>());
      if (vj.contains("rounds")) v.rounds = vj.at("rounds").get<int>();
      cfg.variants.push_back(std::move(v));
    }
  }
  if (cfg.variants.empty()) cfg.variants.push_back(VariantConfig{});
  return cfg;
}

// ---------------------------------------------------------------------------
// Inline problem construction
// ---------------------------------------------------------------------------

namespace detail {

inline CostFunction cost_from_json(const json& j, const std::filesystem::path& base_dir) {
  const std::string kind = j.at("kind").get<std::string>();
  Matrix data;
  if (j.contains("data_csv")) {
    data = read_matrix_csv(base_dir / j.at("data_csv").get<std::string>());
    if (data.cols() < 2) throw ConfigError("data CSV needs regressors plus a target column");
  }
  if (kind == "quadratic") {
    Matrix regressors;
    Vector targets;
    if (j.contains("data_csv")) {
      regressors = data.leftCols(data.cols() - 1);
      targets = data.col(data.cols() - 1);
    } else {
      regressors = matrix_from_json(j.at("regressors"));
      targets = vector_from_json(j.at("targets"));
    }
    return CostFunction::quadratic(std::move(regressors), std::move(targets));
  }
  if (kind == "logistic") {
    const double l2 = j.value("l2", 0.0);
    Matrix regressors;
    Vector labels;
    if (j.contains("data_csv")) {
      regressors = data.leftCols(data.cols() - 1);
      labels = data.col(data.cols() - 1);
    } else {
      regressors = matrix_from_json(j.at("regressors"));
      labels = vector_from_json(j.at("labels"));
    }
    return CostFunction::logistic(std::move(regressors), std::move(labels), l2);
  }
  throw ConfigError("unknown cost kind: " + kind);
}

inline Regularizer regularizer_from_json(const json& j, int dim) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return Regularizer::zero(dim);
  if (kind == "l1") return Regularizer::l1(dim, j.at("eta").get<double>());
  if (kind == "squared_l2") return Regularizer::squared_l2(dim, j.at("eta").get<double>());
  if (kind == "elastic_net")
    return Regularizer::elastic_net(dim, j.at("eta_l1").get<double>(),
                                    j.at("eta_l2").get<double>());
  if (kind == "box")
    return Regularizer::box(dim, j.at("lo").get<double>(), j.at("hi").get<double>());
  throw ConfigError("unknown regularizer kind: " + kind);
}

}  // namespace detail

inline ProblemSpec problem_from_inline_json(const json& j, std::uint64_t seed,
                                            const std::filesystem::path& base_dir) {
  if (!j.contains("topology")) throw ConfigError("inline problem needs 'topology'");
  Network net;
  const json& topo = j.at("topology");
  if (topo.contains("geometric")) {
    const json& g = topo.at("geometric");
    net = random_geometric_network(g.at("agents").get<int>(), g.at("radius").get<double>(),
                                   Rng::derive(seed, stream::kTopology));
  } else {
    net = network_from_json(topo);
  }

  if (!j.contains("costs")) throw ConfigError("inline problem needs 'costs'");
  std::vector<CostFunction> costs;
  for (auto& cj : j.at("costs")) costs.push_back(detail::cost_from_json(cj, base_dir));
  if (static_cast<int>(costs.size()) != net.agent_count)
    throw ConfigError("need one cost per agent");

  std::vector<Regularizer> regs;
  if (j.contains("regularizers")) {
    const auto& rj = j.at("regularizers");
    if (static_cast<int>(rj.size()) != net.agent_count)
      throw ConfigError("need one regularizer per agent");
    for (int k = 1; k <= net.agent_count; ++k)
      regs.push_back(detail::regularizer_from_json(rj.at(k - 1), costs[k - 1].dim()));
  } else {
    for (int k = 1; k <= net.agent_count; ++k)
      regs.push_back(Regularizer::zero(costs[k - 1].dim()));
  }

  if (!j.contains("constraints")) throw ConfigError("inline problem needs 'constraints'");
  const json& cons = j.at("constraints");
  std::vector<ConstraintBlock> blocks;
  if (cons.contains("blocks") && cons.at("blocks").is_array()) {
    for (auto& bj : cons.at("blocks")) {
      ConstraintBlock blk;
      blk.constraint_id = bj.at("e").get<int>();
      blk.agent_id = bj.at("k").get<int>();
      blk.coupling = matrix_from_json(bj.at("B"));
      blk.rhs = bj.contains("b") ? vector_from_json(bj.at("b"))
                                 : Vector::Zero(blk.coupling.rows());
      blocks.push_back(std::move(blk));
    }
  } else {
    // membership + random gaussian blocks drawn from the constraint stream
    std::vector<SubNetwork> subs;
    if (cons.contains("membership") && cons.at("membership").is_string()) {
      if (cons.at("membership").get<std::string>() != "neighborhood")
        throw ConfigError("membership must be \"neighborhood\" or an explicit list");
      subs = neighborhood_subnetworks(net);
    } else if (cons.contains("membership")) {
      for (auto& mj : cons.at("membership")) {
        std::vector<int> members;
        for (auto& m : mj.at("members")) members.push_back(m.get<int>());
        subs.push_back(induced_subnetwork(net, members, mj.at("e").get<int>()));
      }
    } else {
      throw ConfigError("constraints need explicit 'blocks' or a 'membership' rule");
    }
    if (!cons.contains("blocks") || !cons.at("blocks").contains("random_gaussian"))
      throw ConfigError("non-explicit blocks need a 'random_gaussian' generator");
    const int rows = cons.at("blocks").at("random_gaussian").at("rows").get<int>();
    Rng rng(Rng::derive(seed, stream::kConstraints));
    std::vector<int> dims;
    for (auto& c : costs) dims.push_back(c.dim());
    blocks = detail::gaussian_neighborhood_blocks(subs, dims, rows, rng);
    if (cons.value("rhs", std::string("feasible")) == "feasible") {
      std::vector<Vector> anchor(net.agent_count);
      for (int k = 1; k <= net.agent_count; ++k) {
        anchor[k - 1].resize(dims[k - 1]);
        for (int q = 0; q < dims[k - 1]; ++q) anchor[k - 1](q) = rng.normal();
      }
      blocks = feasible_rhs(std::move(blocks), anchor);
    }
  }
  return assemble_problem(std::move(costs), std::move(regs), blocks, std::move(net));
}

inline ProblemSpec build_problem(const ExperimentConfig& cfg) {
  if (!cfg.preset.empty()) return find_preset(cfg.preset)->build(cfg.seed);
  return problem_from_inline_json(*cfg.inline_problem, cfg.seed, cfg.base_dir);
}

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

struct VariantArtifacts {
  std::string name;
  SolverForm form = SolverForm::Agent;
  StepSizes steps;
  int rounds = 0;
  double comm_per_round = 0.0;
  double one_minus_lambda_r = 0.0;
  bool diverged = false;
  Trace trace;
  std::filesystem::path directory;
};

struct ExperimentOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::vector<VariantArtifacts> variants;
};

namespace detail {

inline ReferenceSolution solve_or_load_reference(const ProblemSpec& problem,
                                                 const ExperimentConfig& cfg) {
  const std::filesystem::path cache_dir = cfg.out_dir / "oracle_cache";
  const std::string key = problem_hash(problem);
  const std::filesystem::path cache_file = cache_dir / (key + ".json");
  if (cfg.oracle_cache && std::filesystem::exists(cache_file)) {
    ReferenceSolution ref = reference_from_json(json::parse(read_text_file(cache_file)));
    if (ref.tolerance <= cfg.oracle_tolerance * 10.0) return ref;
  }
  ReferenceSolution ref;
  bool quadratic_smooth = problem.smooth();
  for (auto& c : problem.costs)
    quadratic_smooth &= c.kind() == CostKind::QuadraticLeastSquares;
  if (quadratic_smooth)
    ref = kkt_solve_quadratic(problem);
  else
    ref = centralized_prox_solve(problem, cfg.oracle_tolerance);
  if (cfg.oracle_cache)
    write_text_file(cache_file, reference_to_json(ref).dump(2) + "\n");
  return ref;
}

inline StepSizes resolve_steps(const ExperimentConfig& cfg, const VariantConfig& variant,
                               const ProblemSpec& problem, const LiftedProblem& lifted) {
  if (variant.steps) return *variant.steps;
  if (cfg.steps) return *cfg.steps;
  if (!cfg.auto_steps && !cfg.preset.empty()) return find_preset(cfg.preset)->default_steps;
  const StepLimits lim = step_size_limits(smoothness_params(problem), lifted);
  if (!lim.available)
    throw ConfigError("auto steps need a strongly convex cost; give explicit steps");
  return {0.9 * lim.mu_w_max, 0.9 * lim.mu_v_max};
}

inline json rate_to_json(const RateBound& rb) {
  return json{{"alpha", rb.alpha},
              {"gamma1", rb.gamma1},
              {"gamma2", rb.gamma2},
              {"one_minus_lambda_r", rb.one_minus_lambda_r},
              {"gamma", rb.gamma},
              {"lambda_min_bbt", rb.lambda_min_bbt},
              {"smooth_ok", rb.smooth_ok},
              {"full_row_rank_ok", rb.full_row_rank_ok},
              {"nu_ok", rb.nu_ok},
              {"theorem1_steps_ok", rb.theorem1_steps_ok},
              {"gamma_range_ok", rb.gamma_range_ok},
              {"valid", rb.valid()}};
}

}  // namespace detail

/// Runs one variant end to end (oracle, solver, certificate evaluation) and
/// writes its artifact set under `dir`.
inline VariantArtifacts run_variant(const ProblemSpec& base_problem,
                                    const ExperimentConfig& cfg, const VariantConfig& variant,
                                    SolverForm form, const std::filesystem::path& dir) {
  const auto wall_start = std::chrono::steady_clock::now();
  const ProblemSpec problem =
      variant.flatten ? flatten_to_single_constraint(base_problem) : base_problem;

  std::vector<CombinationMatrix> combos;
  std::vector<double> block_gaps;
  for (auto& sub : problem.subnetworks) {
    combos.push_back(metropolis_matrix(sub));
    block_gaps.push_back(spectral_gap(combos.back().averaged));
  }
  const LiftedProblem lifted = lift(problem);
  const StepSizes steps = detail::resolve_steps(cfg, variant, problem, lifted);
  const SpectralData spectral =
      build_spectral_data(combos, problem.block_rows, steps.mu_v);

  int rounds = 1000;
  if (!cfg.preset.empty()) rounds = find_preset(cfg.preset)->default_rounds;
  if (cfg.rounds) rounds = *cfg.rounds;
  if (variant.rounds) rounds = *variant.rounds;

  const ReferenceSolution reference = detail::solve_or_load_reference(problem, cfg);
  const Vector w_star = stack_reference(problem, reference);
  const SaddleReference saddle = make_saddle_reference(problem, lifted, spectral, reference);
  const SmoothnessParams params = smoothness_params(problem);

  RunHooks hooks;
  hooks.relative_error = [&](const Vector& w) {
    return relative_error(problem, w, w_star).value;
  };
  if (reference.dual_unique)
    hooks.lyapunov = [&](const StateSnapshot& st) {
      return lyapunov(st, saddle, steps, spectral);
    };

  RunOptions options;
  options.form = form;
  options.rounds = rounds;
  options.metrics_stride = cfg.metrics_stride;
  options.record_states = reference.dual_unique && rounds > 0 && rounds <= 5000;

  const RunResult result = run(problem, combos, spectral, steps, options, hooks);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  VariantArtifacts art;
  art.name = variant.name;
  art.form = form;
  art.steps = steps;
  art.rounds = rounds;
  art.comm_per_round = communication_cost(problem);
  art.one_minus_lambda_r = 1.0 - spectral.lambda_r;
  art.diverged = result.diverged;
  art.trace = result.trace;
  art.directory = dir;

  std::filesystem::create_directories(dir / "plotdata");
  write_trace_csv(dir / "trace.csv", result.trace);

  {  // plot data: relative error against rounds and against communicated scalars
    std::ostringstream rounds_csv, comm_csv;
    rounds_csv << "round,rel_error\n";
    comm_csv << "comm_scalars,rel_error\n";
    for (auto& r : result.trace.records) {
      rounds_csv << r.round << ',' << format_double(r.rel_error) << '\n';
      comm_csv << format_double((r.round + 1) * art.comm_per_round) << ','
               << format_double(r.rel_error) << '\n';
    }
    write_text_file(dir / "plotdata" / "rounds_vs_relerr.csv", rounds_csv.str());
    write_text_file(dir / "plotdata" / "comm_vs_relerr.csv", comm_csv.str());
  }

  if (cfg.dump_matrices)
    for (auto& cm : combos)
      write_matrix_csv(dir / ("combination_" + std::to_string(cm.sub_network_id) + ".csv"),
                       cm.weights);

  // final state
  {
    json fs;
    fs["w"] = json::array();
    for (auto& wk : problem.unstack(result.final_state.w)) fs["w"].push_back(vector_to_json(wk));
    fs["dual_copies"] = json::array();
    for (int e = 1; e <= problem.constraint_count(); ++e) {
      json copies = json::array();
      for (int pos = 0; pos < problem.subnetworks[e - 1].size; ++pos)
        copies.push_back(vector_to_json(result.final_state.y.segment(
            lifted.constraint_offsets[e - 1] + pos * problem.block_rows[e - 1],
            problem.block_rows[e - 1])));
      fs["dual_copies"].push_back(
          {{"constraint", e}, {"members", problem.subnetworks[e - 1].members}, {"copies", copies}});
    }
    write_text_file(dir / "final_state.json", fs.dump(2) + "\n");
  }

  const RateBound rb = rate_bound(problem, lifted, spectral, steps);
  const StepLimits limits = step_size_limits(params, lifted);

  json report;
  report["steps"] = {{"mu_w", steps.mu_w}, {"mu_v", steps.mu_v}};
  report["step_size_limits"] = {{"mu_w_max", limits.mu_w_max},
                                {"mu_v_max", limits.available
                                                 ? json(limits.mu_v_max)
                                                 : json(nullptr)},
                                {"available", limits.available}};
  report["rate"] = detail::rate_to_json(rb);
  report["spectral"] = {{"lambda_r", spectral.lambda_r},
                        {"one_minus_lambda_r", 1.0 - spectral.lambda_r},
                        {"per_block_gap", block_gaps},
                        {"degenerate", spectral.degenerate}};
  report["oracle"] = {{"method", reference.method},
                      {"tolerance", reference.tolerance},
                      {"dual_unique", reference.dual_unique}};
  report["tolerances"] = {{"identity_rel", 1e-9},
                          {"inequality_floor", -1e-9},
                          {"lyapunov_rel", 1e-12}};

  if (!result.diverged && options.rounds > 0) {
    const KKTResiduals kkt =
        kkt_residuals(result.final_state.w, result.final_state.y, problem, lifted, spectral);
    report["kkt_final"] = {{"stationarity", kkt.stationarity},
                           {"consensus", kkt.consensus},
                           {"feasibility", kkt.feasibility}};
    report["relative_error_final"] =
        relative_error(problem, result.final_state.w, w_star).value;

    json certificates;
    {  // Lyapunov monotonicity over the recorded trace
      int evaluated = 0, violations = 0;
      double worst = 0.0;
      for (size_t i = 1; i < result.trace.records.size(); ++i) {
        const double prev = result.trace.records[i - 1].lyapunov;
        const double cur = result.trace.records[i].lyapunov;
        if (std::isnan(prev) || std::isnan(cur)) continue;
        ++evaluated;
        const double increase = cur - prev;
        worst = std::max(worst, increase);
        if (increase > 1e-12 * (1.0 + prev)) ++violations;
      }
      certificates["lyapunov"] = {{"evaluated", evaluated},
                                  {"violations", violations},
                                  {"worst_increase", worst}};
    }
    if (options.record_states && result.states.size() > 1) {
      int ineq_viol = 0, eq_viol = 0;
      double worst_slack = std::numeric_limits<double>::infinity();
      double worst_defect = 0.0;
      for (size_t i = 1; i < result.states.size(); ++i) {
        const Lemma3Report l3 = verify_lemma3(result.states[i], result.states[i - 1], saddle,
                                              params, steps, lifted, spectral);
        worst_slack = std::min(worst_slack, l3.inequality_slack);
        worst_defect = std::max(worst_defect, l3.equality_defect_rel);
        if (l3.inequality_slack < -1e-9) ++ineq_viol;
        if (l3.equality_defect_rel > 1e-9) ++eq_viol;
      }
      certificates["primal_dual_bounds"] = {{"evaluated", result.states.size() - 1},
                                            {"inequality_violations", ineq_viol},
                                            {"equality_violations", eq_viol},
                                            {"worst_slack", worst_slack},
                                            {"worst_equality_defect_rel", worst_defect}};
      const LinearRateReport lr =
          verify_linear_rate(result.states, saddle, rb, steps, spectral);
      certificates["linear_rate"] = {{"applicable", lr.applicable},
                                     {"skip_reason", lr.skip_reason},
                                     {"gamma", lr.gamma},
                                     {"checked", lr.checked},
                                     {"violations", lr.violations}};
    }
    report["certificates"] = certificates;
  }
  write_text_file(dir / "report.json", report.dump(2) + "\n");

  json summary;
  summary["variant"] = variant.name;
  summary["form"] = form_to_string(form);
  summary["steps"] = {{"mu_w", steps.mu_w}, {"mu_v", steps.mu_v}};
  summary["rounds"] = rounds;
  summary["completed_rounds"] = result.completed_rounds;
  summary["diverged"] = result.diverged;
  if (result.diverged) summary["diagnostic"] = result.diagnostic;
  summary["comm_scalars_per_round"] = art.comm_per_round;
  summary["gamma"] = rb.gamma;
  summary["one_minus_lambda_r"] = 1.0 - spectral.lambda_r;
  summary["wall_time_s"] = wall_s;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");

  return art;
}

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutcome outcome;
  ProblemSpec base;
  try {
    base = build_problem(cfg);
  } catch (const Error& e) {
    outcome.exit_code = kExitConfig;
    outcome.message = e.what();
    return outcome;
  }

  for (auto& variant : cfg.variants) {
    std::vector<SolverForm> forms;
    if (cfg.all_forms && !variant.form)
      forms = {SolverForm::Agent, SolverForm::Network, SolverForm::XForm};
    else
      forms = {variant.form ? *variant.form : cfg.form};
    for (SolverForm form : forms) {
      std::filesystem::path dir = cfg.out_dir / variant.name;
      if (forms.size() > 1) dir += "-" + form_to_string(form);
      try {
        outcome.variants.push_back(run_variant(base, cfg, variant, form, dir));
        if (outcome.variants.back().diverged) {
          outcome.exit_code = kExitDivergence;
          outcome.message = "variant '" + variant.name + "' diverged";
        }
      } catch (const NoConvergence& e) {
        outcome.exit_code = kExitOracle;
        outcome.message = e.what();
        return outcome;
      } catch (const ConfigError& e) {
        outcome.exit_code = kExitConfig;
        outcome.message = e.what();
        return outcome;
      }
    }
  }
  return outcome;
}

struct ComparisonRow {
  std::string variant;
  double one_minus_lambda_r = 0.0;
  double comm_per_round = 0.0;
  // per threshold: first round / first cumulative scalar count reaching it (-1 = never)
  std::vector<double> rounds_to_threshold;
  std::vector<double> comm_to_threshold;
};

inline ComparisonRow comparison_row(const VariantArtifacts& art,
                                    const std::vector<double>& thresholds) {
  ComparisonRow row;
  row.variant = art.name + "/" + form_to_string(art.form);
  row.one_minus_lambda_r = art.one_minus_lambda_r;
  row.comm_per_round = art.comm_per_round;
  for (double t : thresholds) {
    double round_hit = -1.0, comm_hit = -1.0;
    for (auto& r : art.trace.records)
      if (!std::isnan(r.rel_error) && r.rel_error <= t) {
        round_hit = r.round;
        comm_hit = (r.round + 1) * art.comm_per_round;
        break;
      }
    row.rounds_to_threshold.push_back(round_hit);
    row.comm_to_threshold.push_back(comm_hit);
  }
  return row;
}

/// Runs every variant and emits the rounds/communication-to-threshold table.
inline ExperimentOutcome compare_experiment(const ExperimentConfig& cfg, std::ostream& os) {
  if (cfg.variants.size() < 2) {
    ExperimentOutcome outcome;
    outcome.exit_code = kExitConfig;
    outcome.message = "compare needs at least two variants";
    return outcome;
  }
  ExperimentOutcome outcome = run_experiment(cfg);
  if (outcome.exit_code == kExitOracle || outcome.exit_code == kExitConfig) return outcome;

  std::ostringstream csv;
  csv << "variant,one_minus_lambda_r,comm_per_round";
  for (double t : cfg.thresholds)
    csv << ",rounds_to_" << format_double(t) << ",comm_to_" << format_double(t);
  csv << '\n';

  os << "variant                      1-lambda_r  comm/round";
  for (double t : cfg.thresholds) os << "  rounds@" << t << "  comm@" << t;
  os << '\n';
  for (auto& art : outcome.variants) {
    const ComparisonRow row = comparison_row(art, cfg.thresholds);
    csv << row.variant << ',' << format_double(row.one_minus_lambda_r) << ','
        << format_double(row.comm_per_round);
    os << row.variant;
    for (size_t i = row.variant.size(); i < 29; ++i) os << ' ';
    os << row.one_minus_lambda_r << "  " << row.comm_per_round;
    for (size_t i = 0; i < cfg.thresholds.size(); ++i) {
      csv << ',' << format_double(row.rounds_to_threshold[i]) << ','
          << format_double(row.comm_to_threshold[i]);
      os << "  " << row.rounds_to_threshold[i] << "  " << row.comm_to_threshold[i];
    }
    csv << '\n';
    os << '\n';
  }
  write_text_file(cfg.out_dir / "compare.csv", csv.str());
  return outcome;
}

}  // namespace dcd
