// Experiment runner for the dual coupled diffusion library.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "dcd/dcd.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string form;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int rounds = -1;
};

dcd::ExperimentConfig load_config(const CommonArgs& args) {
  const std::filesystem::path path(args.config_path);
  dcd::json j = dcd::json::parse(dcd::read_text_file(path));
  dcd::ExperimentConfig cfg = dcd::parse_config(j, path.parent_path());
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.rounds >= 0) cfg.rounds = args.rounds;
  if (!args.form.empty()) {
    if (args.form == "all") {
      cfg.all_forms = true;
    } else {
      cfg.all_forms = false;
      cfg.form = dcd::form_from_string(args.form);
    }
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--form", args.form, "agent|network|xform|all")
      ->check(CLI::IsMember({"agent", "network", "xform", "all"}));
  cmd->add_option("--rounds", args.rounds, "round count (overrides config)");
  auto* seed = cmd->add_option("--seed", args.seed, "generator seed (overrides config)");
  seed->each([&args](const std::string&) { args.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual coupled diffusion experiment runner"};
  app.require_subcommand(1);

  CommonArgs run_args, compare_args, validate_args;
  CLI::App* cmd_run = app.add_subcommand("run", "run the configured experiment variants");
  add_common(cmd_run, run_args);
  CLI::App* cmd_compare =
      app.add_subcommand("compare", "run variants and tabulate rounds/communication to "
                                    "reach the error thresholds");
  add_common(cmd_compare, compare_args);
  CLI::App* cmd_validate =
      app.add_subcommand("validate-config", "parse the config and build the problem");
  cmd_validate->add_option("--config", validate_args.config_path, "experiment config (JSON)")
      ->required();
  CLI::App* cmd_presets = app.add_subcommand("presets", "list the preset experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_presets->parsed()) {
      for (auto& p : dcd::preset_registry())
        std::cout << p.name << "\n    " << p.description << "\n    default steps mu_w="
                  << p.default_steps.mu_w << " mu_v=" << p.default_steps.mu_v
                  << ", default rounds " << p.default_rounds << "\n";
      return dcd::kExitOk;
    }
    if (cmd_validate->parsed()) {
      const std::filesystem::path path(validate_args.config_path);
      const dcd::json j = dcd::json::parse(dcd::read_text_file(path));
      const dcd::ExperimentConfig cfg = dcd::parse_config(j, path.parent_path());
      const dcd::ProblemSpec problem = dcd::build_problem(cfg);
      std::cout << "config ok: " << problem.agent_count() << " agents, "
                << problem.constraint_count() << " constraints, primal dimension "
                << problem.primal_dim() << "\n";
      return dcd::kExitOk;
    }
    if (cmd_run->parsed()) {
      const dcd::ExperimentOutcome outcome = dcd::run_experiment(load_config(run_args));
      if (!outcome.message.empty()) std::cerr << outcome.message << "\n";
      for (auto& v : outcome.variants)
        std::cout << v.name << "/" << dcd::form_to_string(v.form) << " -> "
                  << v.directory.string() << (v.diverged ? "  [diverged]" : "") << "\n";
      return outcome.exit_code;
    }
    const dcd::ExperimentOutcome outcome =
        dcd::compare_experiment(load_config(compare_args), std::cout);
    if (!outcome.message.empty()) std::cerr << outcome.message << "\n";
    return outcome.exit_code;
  } catch (const dcd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return dcd::kExitConfig;
  } catch (const dcd::NoConvergence& e) {
    std::cerr << "oracle failure: " << e.what() << "\n";
    return dcd::kExitOracle;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return dcd::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
