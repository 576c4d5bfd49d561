// Command-line front end: sae <simulate|estimate|assess|report> --config run.toml [overrides]

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "sae/cli/config.hpp"
#include "sae/cli/pipeline.hpp"
#include "sae/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Small-area estimation of survey proportions"};
  app.require_subcommand(1);

  std::string config_path;
  sae::cli::Overrides overrides;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  std::string rule;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration (TOML)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "root seed, overrides the config");
    cmd->add_option("--out", out, "output directory, overrides the config");
    cmd->add_option("--threads", threads, "worker threads for MCMC chains")->check(CLI::PositiveNumber);
    cmd->add_flag("--clip-t-draws", overrides.clip_t_draws, "clip simulated t draws to [0, 1]");
    cmd->add_option("--adjacency-rule", rule, "polygon adjacency: shared segment or shared point")
        ->check(CLI::IsMember({"segment", "point"}));
  };
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic population, sample and gold standard");
  auto* estimate = app.add_subcommand("estimate", "run the configured estimators");
  auto* assess = app.add_subcommand("assess", "compare estimates with the gold standard and draw maps");
  auto* report = app.add_subcommand("report", "collect previous outputs into report.md");
  for (auto* cmd : {simulate, estimate, assess, report}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    auto* cmd = app.get_subcommands().front();
    if (cmd->count("--seed")) overrides.seed = seed;
    // Command-line paths are relative to the working directory, config paths to the config file.
    if (cmd->count("--out")) overrides.out = std::filesystem::absolute(out).string();
    if (cmd->count("--threads")) overrides.threads = threads;
    if (cmd->count("--adjacency-rule")) overrides.adjacency_rule = rule;
    const sae::cli::RunConfig config = sae::cli::load_run_config(config_path, overrides);
    if (cmd == simulate) sae::cli::cmd_simulate(config);
    if (cmd == estimate) sae::cli::cmd_estimate(config);
    if (cmd == assess) sae::cli::cmd_assess(config);
    if (cmd == report) sae::cli::cmd_report(config);
  } catch (const sae::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
