#pragma once

// Experiment configuration. The on-disk format is a flat key-value document:
//
//   # comment
//   schema_version = 1
//   scenario.beta = 0.3
//   experiment.seeds = 0, 1, 2
//
// Keys use dotted section names; list values are comma separated. Unknown
// keys are rejected so typos surface immediately. See docs/config.md.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gdmstack/baselines.hpp"
#include "gdmstack/diffusion.hpp"
#include "gdmstack/env.hpp"
#include "gdmstack/partition.hpp"

namespace gdmstack {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<input>");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool contains(const std::string& key) const { return entries_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::optional<std::string> find(const std::string& key) const;
  /// Sorted `key = value` lines.
  std::string dump() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Typed reads over a KeyValueConfig that remember which keys were consumed.
class ConfigReader {
 public:
  explicit ConfigReader(const KeyValueConfig& config) : config_(config) {}

  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<std::string> list(const std::string& key,
                                const std::vector<std::string>& fallback);
  std::vector<int> int_list(const std::string& key, const std::vector<int>& fallback);
  std::vector<std::uint64_t> seed_list(const std::string& key,
                                       const std::vector<std::uint64_t>& fallback);

  /// Throws ConfigError naming every key that was never read.
  void reject_unknown() const;

 private:
  const KeyValueConfig& config_;
  std::set<std::string> consumed_;
};

std::vector<std::string> split_list(const std::string& value);
double parse_number(const std::string& text, const std::string& what);

struct PartitionConfig {
  bool calibrate = false;  ///< fit coeff_A / coeff_B from the synthetic profile
  SyntheticProfileSpec profile;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  ScenarioRanges ranges;
  std::uint64_t scenario_seed = 0;
  std::vector<std::string> solvers{"gdm", "ppo", "random"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int epochs = 500;
  RewardKind reward_mode = RewardKind::raw_utility;
  double reward_scale = 0.0;  ///< 0 means revenue_F
  int horizon = 1;
  std::string output_dir = "out";
  double oracle_epsilon = 1e-6;
  int jobs = 1;
  GdmConfig gdm;
  PpoConfig ppo;
  PartitionConfig partition;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  static ExperimentConfig load(const std::string& path);
  KeyValueConfig to_kv() const;
};

inline const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names{"gdm", "ppo", "random"};
  return names;
}

RewardKind parse_reward_mode(const std::string& name);
std::string to_string(RewardKind kind);

}  // namespace gdmstack
