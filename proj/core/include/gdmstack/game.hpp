#pragma once

// Leader/follower pricing game over transformer-layer offloading.
//
// The edge server (leader) posts a price per layer. Each edge device
// (follower) picks how many encoder layers L to run locally; running L layers
// costs A*L + B computation units out of the device's capacity W. A device's
// utility is revenue plus a concave satisfaction term in its residual
// capacity:
//
//   U_dev(L)  = price * L + alpha * ln(1 + W - (A*L + B))
//   U_srv(P)  = F - sum_n P * L_n - beta * sum_n A * (L_max - L_n)
//
// Followers interact only through the posted price, so the leader's problem
// is one-dimensional and piecewise affine in the price.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gdmstack {

/// A follower action that violates the device's compute capacity.
class InfeasibleAction : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct DeviceProfile {
  double capacity = 0.0;  ///< W: computation units the device can host
  double alpha = 0.0;     ///< weight of the satisfaction term
};

struct MarketParams {
  int n_devices = 10;
  int l_max = 40;
  double coeff_A = 2.0;  ///< computation units per layer
  double coeff_B = 4.0;  ///< fixed computation overhead
  double revenue_F = 1000.0;
  double beta = 0.3;  ///< server cost per computation unit it still runs
  double price_min = 0.01;
  double price_max = 5.0;

  /// Throws std::invalid_argument on non-finite fields, l_max < 1,
  /// coeff_A <= 0, or price_min > price_max. A zero-width price interval is
  /// accepted.
  void validate() const;
};

/// Throws std::invalid_argument unless capacity > coeff_B and alpha >= 0.
void validate_device(const DeviceProfile& device, const MarketParams& market);

struct EquilibriumSolution {
  double price = 0.0;
  std::vector<int> layers;
  double server_utility = 0.0;
  std::vector<double> device_utilities;
  std::size_t candidates_evaluated = 0;
  /// Every candidate price gave the same server utility.
  bool flat_objective = false;
};

/// Largest feasible local layer count: min(l_max, floor((W - B) / A)).
int layer_cap(const DeviceProfile& device, const MarketParams& market);

/// Computation consumed on the device by running `layers` layers.
double device_compute(int layers, const MarketParams& market);

/// Throws InfeasibleAction when the layer count is negative, exceeds l_max,
/// or needs more compute than the device holds.
double device_utility(const DeviceProfile& device, int layers, double price,
                      const MarketParams& market);

/// Utility-maximizing layer count at `price`; ties go to the smaller count.
int best_response(const DeviceProfile& device, double price,
                  const MarketParams& market);

std::vector<int> best_responses(std::span<const DeviceProfile> devices,
                                double price, const MarketParams& market);

double server_utility(double price, std::span<const int> layers,
                      const MarketParams& market);

/// Price above which running L+1 layers is strictly preferred to L.
/// Requires 0 <= L < layer_cap(device, market).
double switch_threshold(const DeviceProfile& device, int layers,
                        const MarketParams& market);

/// Followers best-respond to `price`; fills every field of the solution.
EquilibriumSolution evaluate_price(std::span<const DeviceProfile> devices,
                                   double price, const MarketParams& market);

/// Exact leader optimum over the candidate set formed by the price bounds and
/// every follower switch threshold (and threshold + epsilon). The result is
/// within epsilon * N * l_max of the supremum of the leader's utility.
EquilibriumSolution stackelberg_oracle(std::span<const DeviceProfile> devices,
                                       const MarketParams& market,
                                       double epsilon = 1e-6);

}  // namespace gdmstack
