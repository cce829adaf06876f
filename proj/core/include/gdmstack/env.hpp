#pragma once

// Round-based decision environment around the pricing game. A state is the
// previous round's price and follower layer vector; an action is the next
// price; followers best-respond and the leader's utility becomes the reward.

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gdmstack/game.hpp"
#include "gdmstack/rng.hpp"

namespace gdmstack {

struct ScenarioRanges {
  MarketParams market;
  double capacity_min = 90.0;
  double capacity_max = 120.0;
  double alpha_min = 5.0;
  double alpha_max = 15.0;

  void validate() const;
};

struct Scenario {
  MarketParams market;
  std::vector<DeviceProfile> devices;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an inconsistent device list.
  void validate() const;
};

struct GameState {
  double price_prev = 0.0;
  std::vector<int> layer_prev;

  bool operator==(const GameState&) const = default;
};

enum class RewardKind { raw_utility, binary_improvement };

struct RewardMode {
  RewardKind kind = RewardKind::raw_utility;
  double scale = 1.0;  ///< raw reward = server utility / scale
};

struct StepResult {
  GameState next;
  double reward = 0.0;
  double server_utility = 0.0;
  std::vector<double> device_utilities;
};

/// Draws W_n and alpha_n independently and uniformly from the ranges.
Scenario sample_scenario(const ScenarioRanges& ranges, std::uint64_t seed);

/// Uniform random price with the followers' best responses to it.
GameState reset(const Scenario& scenario, Rng& rng);

/// Throws std::out_of_range for an action outside the price bounds.
StepResult step(const GameState& state, double action, const Scenario& scenario,
                const RewardMode& mode);

/// [price mapped to [-1, 1], L_1 / l_max, ..., L_N / l_max].
Eigen::VectorXd state_features(const GameState& state, const Scenario& scenario);

/// Stateful wrapper that runs episodes of a fixed horizon.
class Environment {
 public:
  Environment(Scenario scenario, RewardMode mode, int horizon = 1);

  /// Starts a new episode if the current one is finished; returns the state
  /// the next action is taken from.
  const GameState& observe(Rng& rng);
  StepResult act(double action);

  bool episode_done() const { return steps_taken_ >= horizon_; }
  int horizon() const { return horizon_; }
  const Scenario& scenario() const { return scenario_; }
  const RewardMode& reward_mode() const { return mode_; }
  int feature_width() const { return scenario_.market.n_devices + 1; }

 private:
  Scenario scenario_;
  RewardMode mode_;
  int horizon_;
  int steps_taken_;
  GameState state_;
};

}  // namespace gdmstack
