// Command-line entry point: run, oracle, sweep, gradcheck.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <optional>

#include "gdmstack/config.hpp"
#include "gdmstack/gradcheck.hpp"
#include "gdmstack/harness.hpp"

namespace {

using namespace gdmstack;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::string solvers;
  std::string reward_mode;
  std::optional<int> epochs;
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (key = value)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--seeds", opts.seeds, "Comma-separated seed list");
  cmd->add_option("--epochs", opts.epochs, "Training epochs per run");
  cmd->add_option("--reward-mode", opts.reward_mode, "raw or binary")
      ->check(CLI::IsMember({"raw", "binary"}));
  cmd->add_option("--solvers", opts.solvers, "Comma-separated solvers: gdm,ppo,random");
  cmd->add_option("--jobs", opts.jobs, "Runs executed concurrently");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  KeyValueConfig kv;
  if (!opts.config_path.empty()) kv = KeyValueConfig::load(opts.config_path);
  if (!opts.out_dir.empty()) kv.set("experiment.output_dir", opts.out_dir);
  if (!opts.seeds.empty()) kv.set("experiment.seeds", opts.seeds);
  if (!opts.solvers.empty()) kv.set("experiment.solvers", opts.solvers);
  if (!opts.reward_mode.empty()) kv.set("experiment.reward_mode", opts.reward_mode);
  if (opts.epochs) kv.set("experiment.epochs", std::to_string(*opts.epochs));
  if (opts.jobs) kv.set("experiment.jobs", std::to_string(*opts.jobs));
  return ExperimentConfig::from_kv(kv);
}

int cmd_run(const CommonOptions& opts) {
  ExperimentConfig config = resolve(opts);
  ExperimentResult result = run_experiment(config);
  write_experiment(result, config, config.output_dir);
  for (const auto& run : result.runs)
    std::cerr << fmt::format("{:<7} seed {:<4} {:>8.2f}s  final utility {:.4f}\n",
                             run.solver, run.seed, run.seconds,
                             run.log.empty() ? 0.0 : run.log.back().server_utility);
  std::cout << summary_table(result.summary);
  std::cout << fmt::format("wrote {} run files to {}\n", result.runs.size(),
                           (std::filesystem::path(config.output_dir) / "runs").string());
  return 0;
}

int cmd_oracle(const CommonOptions& opts) {
  ExperimentConfig config = resolve(opts);
  Scenario scenario = build_scenario(config);
  EquilibriumSolution eq =
      stackelberg_oracle(scenario.devices, scenario.market, config.oracle_epsilon);
  std::cout << equilibrium_report_text(scenario, eq);
  std::filesystem::path dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
  write_file_atomic(dir / "oracle.json",
                    equilibrium_report_json(scenario, eq, config.oracle_epsilon));
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& parameter,
              const std::string& values_text) {
  ExperimentConfig config = resolve(opts);
  std::vector<double> values;
  for (const auto& item : split_list(values_text))
    values.push_back(parse_number(item, "--values"));
  if (values.empty()) throw ConfigError("--values needs at least one number");
  std::string csv = sweep_csv(sweep(config, parameter, values));
  std::filesystem::path dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
  write_file_atomic(dir / fmt::format("sweep_{}.csv", parameter), csv);
  std::cout << csv;
  return 0;
}

int cmd_gradcheck(const CommonOptions& opts, std::uint64_t seed) {
  ExperimentConfig config = resolve(opts);
  bool ok = true;
  for (const auto& entry : run_gradient_checks(config, seed)) {
    std::cout << fmt::format("{:<14} max_rel_err {:.3e}  tol {:.0e}  params {:>6}  {}\n",
                             entry.name, entry.max_relative_error, entry.tolerance,
                             entry.checked, entry.passed() ? "PASS" : "FAIL");
    ok = ok && entry.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg pricing game solvers: exact oracle, diffusion policy, PPO, "
               "random search"};
  app.require_subcommand(1);

  CommonOptions run_opts, oracle_opts, sweep_opts, grad_opts;
  auto* run = app.add_subcommand("run", "Train every solver for every seed");
  add_common(run, run_opts);

  auto* oracle = app.add_subcommand("oracle", "Solve the exact equilibrium");
  add_common(oracle, oracle_opts);

  auto* sweep_cmd = app.add_subcommand("sweep", "Oracle utility versus a parameter");
  add_common(sweep_cmd, sweep_opts);
  std::string parameter;
  std::string values;
  sweep_cmd->add_option("--parameter", parameter, "beta, F, alpha-scale, W-scale, l_max")
      ->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(grad, grad_opts);
  std::uint64_t grad_seed = 0;
  grad->add_option("--seed", grad_seed, "Initialization seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*oracle) return cmd_oracle(oracle_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, parameter, values);
    if (*grad) return cmd_gradcheck(grad_opts, grad_seed);
  } catch (const std::exception& e) {
    std::cerr << "gdmstack: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
