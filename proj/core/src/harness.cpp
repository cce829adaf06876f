#include "gdmstack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "gdmstack/baselines.hpp"
#include "gdmstack/diffusion.hpp"
#include "gdmstack/partition.hpp"

namespace gdmstack {

namespace fs = std::filesystem;

namespace {

std::string format_optional(const std::optional<double>& value) {
  return value ? fmt::format("{}", *value) : std::string("NA");
}

std::string format_table_cell(const std::optional<double>& value) {
  return value ? fmt::format("{:.4f}", *value) : std::string("NA");
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& config) {
  ScenarioRanges ranges = config.ranges;
  if (config.partition.calibrate) {
    SyntheticProfileSpec spec = config.partition.profile;
    spec.l_max = ranges.market.l_max;
    LinearFit fit = fit_linear(synthetic_profile(spec, config.partition.seed));
    ranges.market.coeff_A = fit.coeff_A;
    ranges.market.coeff_B = fit.coeff_B;
  }
  Scenario scenario = sample_scenario(ranges, config.scenario_seed);
  scenario.validate();
  return scenario;
}

RewardMode reward_mode_for(const ExperimentConfig& config) {
  RewardMode mode;
  mode.kind = config.reward_mode;
  mode.scale = config.reward_scale > 0.0 ? config.reward_scale
                                         : config.ranges.market.revenue_F;
  if (!(mode.scale > 0.0)) mode.scale = 1.0;
  return mode;
}

RunRecord run_solver(const std::string& solver, std::uint64_t seed,
                     const Scenario& scenario, const ExperimentConfig& config) {
  auto start = std::chrono::steady_clock::now();
  Environment env(scenario, reward_mode_for(config), config.horizon);
  const auto& market = scenario.market;
  Rng root(seed);
  Rng init = root.fork(1);
  Rng train = root.fork(2);

  RunRecord record;
  record.solver = solver;
  record.seed = seed;
  if (solver == "gdm") {
    GdmConfig gdm = config.gdm;
    gdm.epochs = config.epochs;
    DiffusionPolicy policy = DiffusionPolicy::create(
        gdm.policy, env.feature_width(), market.price_min, market.price_max, init);
    Critic critic(env.feature_width(), gdm.critic_hidden, init);
    GdmTrainer trainer(policy, critic, env, gdm, train);
    record.log = trainer.run();
  } else if (solver == "ppo") {
    PpoConfig ppo = config.ppo;
    ppo.epochs = config.epochs;
    GaussianPolicy policy(env.feature_width(), ppo.hidden, ppo.initial_std,
                          market.price_min, market.price_max, init);
    DenseNet value = make_value_net(env.feature_width(), ppo.hidden, init);
    PpoTrainer trainer(policy, value, env, ppo, train);
    record.log = trainer.run();
  } else if (solver == "random") {
    record.log = random_search(env, config.epochs, mix_seed(seed));
  } else {
    throw ConfigError(fmt::format("unknown solver '{}'", solver));
  }
  record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.scenario = build_scenario(config);
  result.oracle = stackelberg_oracle(result.scenario.devices, result.scenario.market,
                                     config.oracle_epsilon);

  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (const auto& solver : config.solvers)
    for (auto seed : config.seeds) jobs.emplace_back(solver, seed);
  result.runs.resize(jobs.size());

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config.jobs), jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      result.runs[i] = run_solver(jobs[i].first, jobs[i].second, result.scenario, config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          try {
            result.runs[i] =
                run_solver(jobs[i].first, jobs[i].second, result.scenario, config);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  result.summary = summarize(result.runs, config.solvers,
                             result.oracle.server_utility, config.epochs);
  return result;
}

double window_mean(const TrainingLog& log, int first, int last) {
  double sum = 0.0;
  int count = 0;
  for (const auto& row : log)
    if (row.epoch >= first && row.epoch <= last) {
      sum += row.server_utility;
      ++count;
    }
  if (count == 0) throw std::invalid_argument("empty averaging window");
  return sum / count;
}

double window_stddev(const TrainingLog& log, int first, int last) {
  double mean = window_mean(log, first, last);
  double sum = 0.0;
  int count = 0;
  for (const auto& row : log)
    if (row.epoch >= first && row.epoch <= last) {
      sum += (row.server_utility - mean) * (row.server_utility - mean);
      ++count;
    }
  return std::sqrt(sum / count);
}

std::vector<SolverSummary> summarize(const std::vector<RunRecord>& runs,
                                     const std::vector<std::string>& solvers,
                                     double oracle_utility, int epochs) {
  std::vector<SolverSummary> summary;
  for (const auto& solver : solvers) {
    SolverSummary s;
    s.solver = solver;
    s.oracle_utility = oracle_utility;
    double final_sum = 0.0, window_sum = 0.0, spread_sum = 0.0, best_sum = 0.0;
    int count = 0;
    for (const auto& run : runs) {
      if (run.solver != solver || run.log.empty()) continue;
      ++count;
      final_sum += run.log.back().server_utility;
      double best = run.log.front().server_utility;
      for (const auto& row : run.log) best = std::max(best, row.server_utility);
      best_sum += best;
      if (epochs >= kMeanWindowLast) {
        window_sum += window_mean(run.log, kMeanWindowFirst, kMeanWindowLast);
        spread_sum += window_stddev(run.log, kSpreadWindowFirst, kSpreadWindowLast);
      }
    }
    if (count == 0) continue;
    s.final_utility_mean = final_sum / count;
    s.best_seen_mean = best_sum / count;
    if (epochs >= kMeanWindowLast) {
      s.mean_utility_200_500 = window_sum / count;
      s.spread_400_500 = spread_sum / count;
      s.gap = oracle_utility - s.final_utility_mean;
    }
    summary.push_back(s);
  }
  return summary;
}

std::string summary_csv(const std::vector<SolverSummary>& summary) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& s : summary)
    out += fmt::format("{},{},{},{},{}\n", s.solver, s.final_utility_mean,
                       format_optional(s.mean_utility_200_500), s.oracle_utility,
                       format_optional(s.gap));
  return out;
}

std::string summary_table(const std::vector<SolverSummary>& summary) {
  std::string out = fmt::format("{:<8} {:>14} {:>14} {:>14} {:>12} {:>14} {:>14}\n",
                                "solver", "final_utility", "mean_200_500",
                                "oracle", "gap", "best_seen", "std_400_500");
  for (const auto& s : summary)
    out += fmt::format("{:<8} {:>14.4f} {:>14} {:>14.4f} {:>12} {:>14.4f} {:>14}\n",
                       s.solver, s.final_utility_mean,
                       format_table_cell(s.mean_utility_200_500), s.oracle_utility,
                       format_table_cell(s.gap), s.best_seen_mean,
                       format_table_cell(s.spread_400_500));
  return out;
}

std::string equilibrium_report_json(const Scenario& scenario,
                                    const EquilibriumSolution& solution,
                                    double epsilon) {
  const auto& m = scenario.market;
  nlohmann::ordered_json report;
  report["price"] = solution.price;
  report["server_utility"] = solution.server_utility;
  report["layers"] = solution.layers;
  report["device_utilities"] = solution.device_utilities;
  report["candidates_evaluated"] = solution.candidates_evaluated;
  report["flat_objective"] = solution.flat_objective;
  report["epsilon"] = epsilon;
  report["error_bound"] = epsilon * static_cast<double>(scenario.devices.size()) * m.l_max;
  report["market"] = {{"n_devices", m.n_devices}, {"l_max", m.l_max},
                      {"coeff_A", m.coeff_A},     {"coeff_B", m.coeff_B},
                      {"revenue_F", m.revenue_F}, {"beta", m.beta},
                      {"price_min", m.price_min}, {"price_max", m.price_max}};
  report["scenario_seed"] = scenario.seed;
  auto devices = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < scenario.devices.size(); ++n) {
    const auto& d = scenario.devices[n];
    int cap = layer_cap(d, m);
    int chosen = solution.layers[n];
    nlohmann::ordered_json entry;
    entry["capacity"] = d.capacity;
    entry["alpha"] = d.alpha;
    entry["layer_cap"] = cap;
    entry["layers"] = chosen;
    // Thresholds bracketing the chosen price: the response is `chosen` for
    // prices in (lower, upper].
    entry["threshold_lower"] =
        chosen > 0 ? nlohmann::ordered_json(switch_threshold(d, chosen - 1, m))
                   : nlohmann::ordered_json(nullptr);
    entry["threshold_upper"] =
        chosen < cap ? nlohmann::ordered_json(switch_threshold(d, chosen, m))
                     : nlohmann::ordered_json(nullptr);
    devices.push_back(entry);
  }
  report["devices"] = devices;
  return report.dump(2) + "\n";
}

std::string equilibrium_report_text(const Scenario& scenario,
                                    const EquilibriumSolution& solution) {
  const auto& m = scenario.market;
  std::string out;
  out += fmt::format("price*          {:.6f}\n", solution.price);
  out += fmt::format("server utility  {:.6f}\n", solution.server_utility);
  out += fmt::format("candidates      {}\n", solution.candidates_evaluated);
  if (solution.flat_objective)
    out += "flat objective  every candidate price yields the same server utility\n";
  out += fmt::format("{:>6} {:>10} {:>8} {:>5} {:>7} {:>12} {:>12} {:>12}\n", "device",
                     "capacity", "alpha", "cap", "layers", "utility", "tau_lower",
                     "tau_upper");
  for (std::size_t n = 0; n < scenario.devices.size(); ++n) {
    const auto& d = scenario.devices[n];
    int cap = layer_cap(d, m);
    int chosen = solution.layers[n];
    std::string lower = chosen > 0
                            ? fmt::format("{:.6f}", switch_threshold(d, chosen - 1, m))
                            : std::string("-");
    std::string upper = chosen < cap
                            ? fmt::format("{:.6f}", switch_threshold(d, chosen, m))
                            : std::string("-");
    out += fmt::format("{:>6} {:>10.4f} {:>8.4f} {:>5} {:>7} {:>12.4f} {:>12} {:>12}\n",
                       n, d.capacity, d.alpha, cap, chosen,
                       solution.device_utilities[n], lower, upper);
  }
  return out;
}

std::string run_file_name(const std::string& solver, std::uint64_t seed) {
  return fmt::format("{}_seed{}.csv", solver, seed);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " into place: " +
                             ec.message());
  }
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "runs", ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir.string() + ": " +
                             ec.message());
  for (const auto& run : result.runs)
    write_file_atomic(dir / "runs" / run_file_name(run.solver, run.seed),
                      run_csv(run.log));
  write_file_atomic(dir / "summary.csv", summary_csv(result.summary));
  write_file_atomic(dir / "summary.txt", summary_table(result.summary));
  write_file_atomic(dir / "oracle.json",
                    equilibrium_report_json(result.scenario, result.oracle,
                                            config.oracle_epsilon));
  write_file_atomic(dir / "config.cfg", config.to_kv().dump());
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::string& parameter,
                            const std::vector<double>& values) {
  const auto& names = sweep_parameters();
  if (std::find(names.begin(), names.end(), parameter) == names.end())
    throw ConfigError(fmt::format("unknown sweep parameter '{}'", parameter));
  const Scenario base = build_scenario(config);
  std::vector<SweepRow> rows;
  for (double value : values) {
    Scenario s = base;
    if (parameter == "beta") {
      s.market.beta = value;
    } else if (parameter == "F") {
      s.market.revenue_F = value;
    } else if (parameter == "alpha-scale") {
      for (auto& d : s.devices) d.alpha *= value;
    } else if (parameter == "W-scale") {
      for (auto& d : s.devices) d.capacity *= value;
    } else {
      if (value != std::floor(value) || value < 1.0)
        throw ConfigError(fmt::format("l_max sweep value {} is not a positive integer",
                                      value));
      s.market.l_max = static_cast<int>(value);
    }
    s.validate();
    EquilibriumSolution eq = stackelberg_oracle(s.devices, s.market, config.oracle_epsilon);
    rows.push_back({value, eq.price, eq.server_utility});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{}\n", r.value, r.price, r.server_utility);
  return out;
}

}  // namespace gdmstack
