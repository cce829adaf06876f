#include "gdmstack/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <stdexcept>

#include "gdmstack/rng.hpp"

namespace gdmstack {

void LayerCostProfile::validate() const {
  if (per_layer_cost.empty())
    throw std::invalid_argument("layer cost profile is empty");
  for (double c : per_layer_cost)
    if (!(c > 0.0) || !std::isfinite(c))
      throw std::invalid_argument("layer costs must be positive and finite");
  if (!(fixed_cost > 0.0) || !std::isfinite(fixed_cost))
    throw std::invalid_argument("fixed cost must be positive and finite");
  if (token_count <= 0 || hidden_dim <= 0 || bytes_per_element <= 0)
    throw std::invalid_argument("payload dimensions must be positive");
}

LayerCostProfile synthetic_profile(const SyntheticProfileSpec& spec,
                                   std::uint64_t seed) {
  if (spec.l_max < 1) throw std::invalid_argument("l_max must be >= 1");
  if (spec.jitter < 0.0 || spec.jitter >= 1.0)
    throw std::invalid_argument("jitter must lie in [0, 1)");
  Rng rng(seed);
  LayerCostProfile profile;
  profile.per_layer_cost.reserve(spec.l_max);
  for (int i = 0; i < spec.l_max; ++i) {
    double noise = spec.jitter > 0.0 ? rng.uniform(-spec.jitter, spec.jitter) : 0.0;
    profile.per_layer_cost.push_back(spec.layer_cost * (1.0 + noise));
  }
  profile.fixed_cost = spec.fixed_cost;
  profile.token_count = spec.token_count;
  profile.hidden_dim = spec.hidden_dim;
  profile.bytes_per_element = spec.bytes_per_element;
  profile.validate();
  return profile;
}

double cumulative_cost(const LayerCostProfile& profile, int layers) {
  if (layers < 0 || layers > profile.l_max())
    throw std::out_of_range(fmt::format("layer index {} outside [0, {}]",
                                        layers, profile.l_max()));
  double total = profile.fixed_cost;
  for (int i = 0; i < layers; ++i) total += profile.per_layer_cost[i];
  return total;
}

LinearFit fit_linear(const LayerCostProfile& profile) {
  const int l_max = profile.l_max();
  if (l_max < 2) throw std::invalid_argument("fit_linear needs l_max >= 2");

  const int points = l_max + 1;
  std::vector<double> y(points);
  y[0] = profile.fixed_cost;
  for (int l = 1; l < points; ++l) y[l] = y[l - 1] + profile.per_layer_cost[l - 1];
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; }))
    throw std::invalid_argument("cumulative cost is constant; slope undefined");

  // Centered normal equations.
  double x_mean = 0.5 * l_max;
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= points;
  double sxx = 0.0;
  double sxy = 0.0;
  for (int l = 0; l < points; ++l) {
    double dx = l - x_mean;
    sxx += dx * dx;
    sxy += dx * (y[l] - y_mean);
  }

  LinearFit fit;
  fit.coeff_A = sxy / sxx;
  fit.coeff_B = y_mean - fit.coeff_A * x_mean;
  for (int l = 0; l < points; ++l)
    fit.max_residual = std::max(
        fit.max_residual, std::abs(y[l] - (fit.coeff_A * l + fit.coeff_B)));
  return fit;
}

SplitCost split_cost(const LayerCostProfile& profile, int split_at) {
  SplitCost cost;
  cost.device_cost = cumulative_cost(profile, split_at);
  cost.server_cost = cumulative_cost(profile, profile.l_max()) - cost.device_cost;
  cost.payload_bytes = static_cast<std::size_t>(profile.token_count) *
                       static_cast<std::size_t>(profile.hidden_dim) *
                       static_cast<std::size_t>(profile.bytes_per_element);
  return cost;
}

}  // namespace gdmstack
