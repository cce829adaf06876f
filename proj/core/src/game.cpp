#include "gdmstack/game.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace gdmstack {

namespace {

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace

void MarketParams::validate() const {
  if (!all_finite({coeff_A, coeff_B, revenue_F, beta, price_min, price_max}))
    throw std::invalid_argument("market parameters must be finite");
  if (n_devices < 1) throw std::invalid_argument("n_devices must be >= 1");
  if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
  if (coeff_A <= 0.0) throw std::invalid_argument("coeff_A must be > 0");
  if (coeff_B < 0.0) throw std::invalid_argument("coeff_B must be >= 0");
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (price_min < 0.0 || price_min > price_max)
    throw std::invalid_argument(fmt::format(
        "price bounds [{}, {}] are invalid", price_min, price_max));
}

void validate_device(const DeviceProfile& device, const MarketParams& market) {
  if (!std::isfinite(device.capacity) || !std::isfinite(device.alpha))
    throw std::invalid_argument("device parameters must be finite");
  if (device.capacity <= market.coeff_B)
    throw std::invalid_argument(fmt::format(
        "device capacity {} must exceed the fixed overhead {}",
        device.capacity, market.coeff_B));
  if (device.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
}

int layer_cap(const DeviceProfile& device, const MarketParams& market) {
  double headroom = device.capacity - market.coeff_B;
  if (headroom < 0.0) return 0;
  double raw = std::floor(headroom / market.coeff_A);
  int cap = static_cast<int>(std::min<double>(raw, market.l_max));
  // The division can round across an integer boundary; settle on the exact
  // feasibility test used by device_utility.
  while (cap < market.l_max && device_compute(cap + 1, market) <= device.capacity)
    ++cap;
  while (cap > 0 && device_compute(cap, market) > device.capacity) --cap;
  return cap;
}

double device_compute(int layers, const MarketParams& market) {
  return market.coeff_A * layers + market.coeff_B;
}

double device_utility(const DeviceProfile& device, int layers, double price,
                      const MarketParams& market) {
  if (layers > market.l_max)
    throw InfeasibleAction(
        fmt::format("{} layers exceed the {}-layer model", layers, market.l_max));
  double residual = device.capacity - device_compute(layers, market);
  if (layers < 0 || residual < 0.0)
    throw InfeasibleAction(fmt::format(
        "{} layers need {} units but the device holds {}", layers,
        device_compute(layers, market), device.capacity));
  return price * layers + device.alpha * std::log1p(residual);
}

int best_response(const DeviceProfile& device, double price,
                  const MarketParams& market) {
  const int cap = layer_cap(device, market);
  if (cap == 0) return 0;

  // Stationary point of the continuous relaxation; the discrete utility is
  // concave, so the optimum sits next to it once clamped.
  double stationary;
  if (price > 0.0) {
    stationary = (device.capacity - market.coeff_B + 1.0 -
                  device.alpha * market.coeff_A / price) /
                 market.coeff_A;
  } else {
    stationary = device.alpha > 0.0 ? -1.0 : 0.0;
  }
  stationary = std::clamp(stationary, -1.0, static_cast<double>(cap) + 1.0);

  const int lo = std::max(0, static_cast<int>(std::floor(stationary)) - 1);
  const int hi = std::min(cap, static_cast<int>(std::ceil(stationary)) + 1);

  int best = lo;
  double best_utility = device_utility(device, lo, price, market);
  for (int layers = lo + 1; layers <= hi; ++layers) {
    double u = device_utility(device, layers, price, market);
    if (u > best_utility) {
      best = layers;
      best_utility = u;
    }
  }
  return best;
}

std::vector<int> best_responses(std::span<const DeviceProfile> devices,
                                double price, const MarketParams& market) {
  std::vector<int> layers;
  layers.reserve(devices.size());
  for (const auto& device : devices)
    layers.push_back(best_response(device, price, market));
  return layers;
}

double server_utility(double price, std::span<const int> layers,
                      const MarketParams& market) {
  double payments = 0.0;
  double remaining = 0.0;
  for (int l : layers) {
    payments += price * l;
    remaining += market.coeff_A * (market.l_max - l);
  }
  return market.revenue_F - payments - market.beta * remaining;
}

double switch_threshold(const DeviceProfile& device, int layers,
                        const MarketParams& market) {
  const int cap = layer_cap(device, market);
  if (layers < 0 || layers >= cap)
    throw std::out_of_range(
        fmt::format("switch threshold needs 0 <= L < {}, got {}", cap, layers));
  double here = device.capacity - device_compute(layers, market);
  double next = device.capacity - device_compute(layers + 1, market);
  return device.alpha * (std::log1p(here) - std::log1p(next));
}

EquilibriumSolution evaluate_price(std::span<const DeviceProfile> devices,
                                   double price, const MarketParams& market) {
  EquilibriumSolution solution;
  solution.price = price;
  solution.layers = best_responses(devices, price, market);
  solution.server_utility = server_utility(price, solution.layers, market);
  solution.device_utilities.reserve(devices.size());
  for (std::size_t n = 0; n < devices.size(); ++n)
    solution.device_utilities.push_back(
        device_utility(devices[n], solution.layers[n], price, market));
  solution.candidates_evaluated = 1;
  return solution;
}

EquilibriumSolution stackelberg_oracle(std::span<const DeviceProfile> devices,
                                       const MarketParams& market,
                                       double epsilon) {
  if (devices.empty())
    throw std::invalid_argument("stackelberg_oracle needs at least one device");
  if (!(epsilon > 0.0))
    throw std::invalid_argument("oracle epsilon must be > 0");
  market.validate();
  for (const auto& device : devices) validate_device(device, market);

  auto clamp_price = [&](double p) {
    return std::clamp(p, market.price_min, market.price_max);
  };

  std::vector<double> candidates{market.price_min, market.price_max};
  for (const auto& device : devices) {
    const int cap = layer_cap(device, market);
    for (int layers = 0; layers < cap; ++layers) {
      double tau = switch_threshold(device, layers, market);
      candidates.push_back(clamp_price(tau));
      candidates.push_back(clamp_price(tau + epsilon));
    }
  }

  std::vector<int> response(devices.size());
  double best_price = candidates.front();
  double best_utility = 0.0;
  double worst_utility = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double price = candidates[i];
    for (std::size_t n = 0; n < devices.size(); ++n)
      response[n] = best_response(devices[n], price, market);
    double u = server_utility(price, response, market);
    if (i == 0 || u > best_utility) {
      best_utility = u;
      best_price = price;
    }
    worst_utility = i == 0 ? u : std::min(worst_utility, u);
  }

  EquilibriumSolution solution = evaluate_price(devices, best_price, market);
  solution.candidates_evaluated = candidates.size();
  const double scale = std::max(1.0, std::abs(best_utility));
  solution.flat_objective = best_utility - worst_utility <= 1e-12 * scale;
  return solution;
}

}  // namespace gdmstack
