#pragma once

// Split-encoder cost model: a per-layer computation profile for a stack of
// identical transformer layers, its linear fit A*L + B, and the device/server
// cost split at a given partition point.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gdmstack {

struct LayerCostProfile {
  std::vector<double> per_layer_cost;  ///< index i holds layer i+1
  double fixed_cost = 0.0;             ///< embedding / front-end overhead
  int token_count = 50;
  int hidden_dim = 768;
  int bytes_per_element = 4;

  int l_max() const { return static_cast<int>(per_layer_cost.size()); }
  /// Throws std::invalid_argument unless every entry is positive and finite.
  void validate() const;
};

struct SyntheticProfileSpec {
  int l_max = 40;
  double layer_cost = 2.0;
  double fixed_cost = 4.0;
  /// Each layer cost is multiplied by 1 + U(-jitter, jitter).
  double jitter = 0.0;
  int token_count = 50;
  int hidden_dim = 768;
  int bytes_per_element = 4;
};

struct LinearFit {
  double coeff_A = 0.0;
  double coeff_B = 0.0;
  double max_residual = 0.0;
};

struct SplitCost {
  double device_cost = 0.0;
  double server_cost = 0.0;
  std::size_t payload_bytes = 0;
};

LayerCostProfile synthetic_profile(const SyntheticProfileSpec& spec,
                                   std::uint64_t seed);

/// C(L) = fixed_cost + sum of the first L layer costs.
double cumulative_cost(const LayerCostProfile& profile, int layers);

/// Least-squares fit of C(L) ~ A*L + B over L = 0..l_max.
/// Throws std::invalid_argument when l_max < 2 or C is constant.
LinearFit fit_linear(const LayerCostProfile& profile);

/// Throws std::out_of_range unless 0 <= split_at <= l_max.
SplitCost split_cost(const LayerCostProfile& profile, int split_at);

}  // namespace gdmstack
