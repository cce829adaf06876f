#include "gdmstack/env.hpp"

#include <fmt/format.h>
#include <stdexcept>

namespace gdmstack {

void ScenarioRanges::validate() const {
  market.validate();
  if (capacity_min > capacity_max)
    throw std::invalid_argument(fmt::format(
        "capacity range [{}, {}] is inverted", capacity_min, capacity_max));
  if (alpha_min > alpha_max)
    throw std::invalid_argument(
        fmt::format("alpha range [{}, {}] is inverted", alpha_min, alpha_max));
  if (capacity_min <= market.coeff_B)
    throw std::invalid_argument("capacity range must exceed coeff_B");
  if (alpha_min < 0.0) throw std::invalid_argument("alpha range must be >= 0");
}

void Scenario::validate() const {
  market.validate();
  if (static_cast<int>(devices.size()) != market.n_devices)
    throw std::invalid_argument(fmt::format(
        "scenario has {} devices but n_devices = {}", devices.size(),
        market.n_devices));
  for (const auto& device : devices) validate_device(device, market);
}

Scenario sample_scenario(const ScenarioRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  Rng rng(seed);
  Scenario scenario;
  scenario.market = ranges.market;
  scenario.seed = seed;
  scenario.devices.reserve(ranges.market.n_devices);
  for (int n = 0; n < ranges.market.n_devices; ++n) {
    DeviceProfile device;
    device.capacity = rng.uniform(ranges.capacity_min, ranges.capacity_max);
    device.alpha = rng.uniform(ranges.alpha_min, ranges.alpha_max);
    scenario.devices.push_back(device);
  }
  return scenario;
}

GameState reset(const Scenario& scenario, Rng& rng) {
  const auto& market = scenario.market;
  GameState state;
  state.price_prev = rng.uniform(market.price_min, market.price_max);
  state.layer_prev = best_responses(scenario.devices, state.price_prev, market);
  return state;
}

StepResult step(const GameState& state, double action, const Scenario& scenario,
                const RewardMode& mode) {
  const auto& market = scenario.market;
  if (!(action >= market.price_min && action <= market.price_max))
    throw std::out_of_range(fmt::format("action {} outside price bounds [{}, {}]",
                                        action, market.price_min,
                                        market.price_max));
  EquilibriumSolution outcome = evaluate_price(scenario.devices, action, market);

  StepResult result;
  result.next.price_prev = action;
  result.next.layer_prev = outcome.layers;
  result.server_utility = outcome.server_utility;
  result.device_utilities = std::move(outcome.device_utilities);
  if (mode.kind == RewardKind::raw_utility) {
    result.reward = result.server_utility / mode.scale;
  } else {
    double previous = server_utility(state.price_prev, state.layer_prev, market);
    result.reward = result.server_utility > previous ? 1.0 : 0.0;
  }
  return result;
}

Eigen::VectorXd state_features(const GameState& state, const Scenario& scenario) {
  const auto& market = scenario.market;
  Eigen::VectorXd features(market.n_devices + 1);
  double width = market.price_max - market.price_min;
  features[0] =
      width > 0.0 ? 2.0 * (state.price_prev - market.price_min) / width - 1.0 : 0.0;
  for (int n = 0; n < market.n_devices; ++n)
    features[n + 1] = static_cast<double>(state.layer_prev.at(n)) / market.l_max;
  return features;
}

Environment::Environment(Scenario scenario, RewardMode mode, int horizon)
    : scenario_(std::move(scenario)),
      mode_(mode),
      horizon_(horizon),
      steps_taken_(horizon) {
  scenario_.validate();
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(mode_.scale > 0.0)) throw std::invalid_argument("reward scale must be > 0");
}

const GameState& Environment::observe(Rng& rng) {
  if (episode_done()) {
    state_ = reset(scenario_, rng);
    steps_taken_ = 0;
  }
  return state_;
}

StepResult Environment::act(double action) {
  if (episode_done())
    throw std::logic_error("Environment::act called without observe()");
  StepResult result = step(state_, action, scenario_, mode_);
  state_ = result.next;
  ++steps_taken_;
  return result;
}

}  // namespace gdmstack
