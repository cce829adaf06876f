#pragma once

// Experiment orchestration: builds the scenario, runs every (solver, seed)
// pair, solves the exact equilibrium once, and writes run CSVs plus a
// summary. Every artifact is a pure function of the configuration.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gdmstack/config.hpp"
#include "gdmstack/game.hpp"
#include "gdmstack/training_log.hpp"

namespace gdmstack {

/// Averaging window for the "mean utility" statistic (1-based, inclusive).
inline constexpr int kMeanWindowFirst = 200;
inline constexpr int kMeanWindowLast = 500;
/// Window for the convergence (spread) statistic.
inline constexpr int kSpreadWindowFirst = 400;
inline constexpr int kSpreadWindowLast = 500;

inline constexpr const char* kSummaryCsvHeader =
    "solver,final_utility_mean,mean_utility_200_500,oracle_utility,gap";
inline constexpr const char* kSweepCsvHeader = "value,price,server_utility";

struct RunRecord {
  std::string solver;
  std::uint64_t seed = 0;
  TrainingLog log;
  double seconds = 0.0;  ///< wall clock; never written to artifacts
};

struct SolverSummary {
  std::string solver;
  double final_utility_mean = 0.0;
  std::optional<double> mean_utility_200_500;
  double oracle_utility = 0.0;
  std::optional<double> gap;  ///< oracle - final utility mean
  double best_seen_mean = 0.0;
  std::optional<double> spread_400_500;  ///< mean over seeds of the std-dev
};

struct ExperimentResult {
  Scenario scenario;
  EquilibriumSolution oracle;
  std::vector<RunRecord> runs;
  std::vector<SolverSummary> summary;
};

/// Samples the configured scenario, applying the partition calibration when
/// enabled.
Scenario build_scenario(const ExperimentConfig& config);

RewardMode reward_mode_for(const ExperimentConfig& config);

/// Trains or searches with one solver under one seed.
RunRecord run_solver(const std::string& solver, std::uint64_t seed,
                     const Scenario& scenario, const ExperimentConfig& config);

/// Runs everything in memory; no files are touched.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<SolverSummary> summarize(const std::vector<RunRecord>& runs,
                                     const std::vector<std::string>& solvers,
                                     double oracle_utility, int epochs);

/// Mean of server utility over 1-based epochs [first, last] of a log.
double window_mean(const TrainingLog& log, int first, int last);
/// Population standard deviation of server utility over [first, last].
double window_stddev(const TrainingLog& log, int first, int last);

std::string summary_csv(const std::vector<SolverSummary>& summary);
std::string summary_table(const std::vector<SolverSummary>& summary);

/// JSON report of an equilibrium with per-device threshold diagnostics.
std::string equilibrium_report_json(const Scenario& scenario,
                                    const EquilibriumSolution& solution,
                                    double epsilon);
std::string equilibrium_report_text(const Scenario& scenario,
                                    const EquilibriumSolution& solution);

std::string run_file_name(const std::string& solver, std::uint64_t seed);

/// Writes runs/<solver>_seed<k>.csv, summary.csv, summary.txt, oracle.json and
/// config.cfg under `dir`. Throws std::runtime_error when `dir` is unwritable.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"beta", "F", "alpha-scale", "W-scale",
                                              "l_max"};
  return names;
}

struct SweepRow {
  double value = 0.0;
  double price = 0.0;
  double server_utility = 0.0;
};

/// One oracle solve per value of `parameter`. Throws ConfigError for an
/// unknown parameter name.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<double>& values);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace gdmstack
