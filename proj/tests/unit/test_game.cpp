#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gdmstack/env.hpp"
#include "gdmstack/game.hpp"
#include "gdmstack/rng.hpp"
#include "oracles.hpp"

namespace gdmstack {
namespace {

DeviceProfile device(double w, double alpha) { return {w, alpha}; }

TEST(DeviceCompute, MatchesLinearCost) {
  MarketParams m;
  EXPECT_DOUBLE_EQ(device_compute(0, m), 4.0);
  EXPECT_DOUBLE_EQ(device_compute(38, m), 80.0);
  MarketParams tiny;
  tiny.coeff_A = 0.001;
  tiny.coeff_B = 0.0;
  EXPECT_DOUBLE_EQ(device_compute(1, tiny), 0.001);
}

TEST(DeviceUtility, KnownValues) {
  MarketParams m;
  // 38 + 10 ln 21, recomputed by hand: ln 21 = 3.044522437723423
  EXPECT_NEAR(device_utility(device(100, 10), 38, 1.0, m), 68.44522437723423, 1e-12);
  EXPECT_DOUBLE_EQ(device_utility(device(100, 0), 40, 0.5, m), 20.0);
  EXPECT_DOUBLE_EQ(device_utility(device(100, 10), 0, 0.0, m), 10.0 * std::log(97.0));
}

TEST(DeviceUtility, InfeasibleLayerCountThrows) {
  MarketParams m;
  // W=50 fits at most 23 layers.
  EXPECT_THROW(device_utility(device(50, 10), 24, 1.0, m), InfeasibleAction);
  EXPECT_THROW(device_utility(device(100, 10), -1, 1.0, m), InfeasibleAction);
  EXPECT_THROW(device_utility(device(100, 10), 41, 1.0, m), InfeasibleAction);
  EXPECT_NO_THROW(device_utility(device(50, 10), 23, 1.0, m));
}

TEST(LayerCap, CapacityOrDepthBinds) {
  MarketParams m;
  EXPECT_EQ(layer_cap(device(100, 10), m), 40);
  EXPECT_EQ(layer_cap(device(50, 10), m), 23);
  EXPECT_EQ(layer_cap(device(5, 10), m), 0);
}

TEST(BestResponse, SpecExamples) {
  MarketParams m;
  EXPECT_EQ(best_response(device(100, 10), 1.0, m), 38);
  EXPECT_EQ(best_response(device(100, 10), 0.0, m), 0);
  EXPECT_EQ(best_response(device(100, 0), 0.5, m), 40);
}

TEST(BestResponse, MatchesEnumerationOnRandomPairs) {
  MarketParams m;
  Rng rng(17);
  int mismatches = 0;
  for (int i = 0; i < 2000; ++i) {
    DeviceProfile d{rng.uniform(90, 120), rng.uniform(5, 15)};
    double p = rng.uniform(m.price_min, m.price_max);
    if (best_response(d, p, m) != testing::enumerate_best_response(d, p, m)) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(BestResponse, MatchesEnumerationOnTightCapacities) {
  MarketParams m;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    DeviceProfile d{rng.uniform(4.5, 90), rng.uniform(0, 60)};
    double p = rng.uniform(0, 10);
    ASSERT_EQ(best_response(d, p, m), testing::enumerate_best_response(d, p, m))
        << "W=" << d.capacity << " alpha=" << d.alpha << " P=" << p;
  }
}

TEST(BestResponse, FlipsAtSwitchThreshold) {
  MarketParams m;
  DeviceProfile d = device(100, 10);
  for (int l : {0, 10, 38}) {
    double tau = switch_threshold(d, l, m);
    EXPECT_EQ(best_response(d, tau * (1 - 1e-9), m), l);
    EXPECT_EQ(best_response(d, tau * (1 + 1e-9), m), l + 1);
  }
}

TEST(BestResponse, MonotoneInPrice) {
  MarketParams m;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    DeviceProfile d{rng.uniform(90, 120), rng.uniform(5, 15)};
    int prev = 0;
    for (double p = 0.0; p <= 5.0; p += 0.01) {
      int l = best_response(d, p, m);
      ASSERT_GE(l, prev);
      prev = l;
    }
  }
}

TEST(DeviceUtility, DiscreteConcaveInLayers) {
  MarketParams m;
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    DeviceProfile d{rng.uniform(90, 120), rng.uniform(5, 15)};
    double p = rng.uniform(0, 5);
    int cap = layer_cap(d, m);
    for (int l = 1; l < cap; ++l) {
      double second = device_utility(d, l + 1, p, m) - 2 * device_utility(d, l, p, m) +
                      device_utility(d, l - 1, p, m);
      ASSERT_LE(second, 1e-12);
    }
  }
}

TEST(ServerUtility, SpecExamples) {
  MarketParams m;
  std::vector<int> l38{38, 38};
  EXPECT_NEAR(server_utility(1.0, l38, m), 921.6, 1e-12);
  std::vector<int> l40{40, 40};
  EXPECT_DOUBLE_EQ(server_utility(1.0, l40, m), 920.0);
  MarketParams free = m;
  free.beta = 0.0;
  free.revenue_F = 123.0;
  std::vector<int> zero{0, 0, 0};
  EXPECT_DOUBLE_EQ(server_utility(0.0, zero, free), 123.0);
}

TEST(SwitchThreshold, KnownValues) {
  MarketParams m;
  EXPECT_NEAR(switch_threshold(device(100, 10), 38, m), 10 * std::log(21.0 / 19.0), 1e-12);
  EXPECT_NEAR(switch_threshold(device(100, 10), 0, m), 10 * std::log(97.0 / 95.0), 1e-12);
  EXPECT_DOUBLE_EQ(switch_threshold(device(100, 0), 7, m), 0.0);
}

TEST(SwitchThreshold, SeparatesAdjacentPreferences) {
  MarketParams m;
  DeviceProfile d = device(100, 10);
  double tau = switch_threshold(d, 38, m);
  EXPECT_GT(device_utility(d, 38, tau - 1e-6, m), device_utility(d, 39, tau - 1e-6, m));
  EXPECT_LT(device_utility(d, 38, tau + 1e-6, m), device_utility(d, 39, tau + 1e-6, m));
}

TEST(SwitchThreshold, IncreasingInLayers) {
  MarketParams m;
  DeviceProfile d = device(97.3, 11.2);
  for (int l = 1; l < layer_cap(d, m); ++l)
    EXPECT_GT(switch_threshold(d, l, m), switch_threshold(d, l - 1, m));
}

TEST(SwitchThreshold, OutOfRangeThrows) {
  MarketParams m;
  EXPECT_THROW(switch_threshold(device(100, 10), 40, m), std::out_of_range);
  EXPECT_THROW(switch_threshold(device(100, 10), -1, m), std::out_of_range);
}

TEST(MarketParams, Validation) {
  MarketParams m;
  EXPECT_NO_THROW(m.validate());
  MarketParams bad = m;
  bad.price_min = 6.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = m;
  bad.coeff_A = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = m;
  bad.l_max = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = m;
  bad.beta = std::nan("");
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  MarketParams pinned = m;
  pinned.price_min = pinned.price_max = 1.0;
  EXPECT_NO_THROW(pinned.validate());
  EXPECT_THROW(validate_device(device(3.0, 1.0), m), std::invalid_argument);
  EXPECT_THROW(validate_device(device(100.0, -1.0), m), std::invalid_argument);
}

TEST(Oracle, SingleRevenueOnlyDevice) {
  MarketParams m;
  m.beta = 1.0;
  std::vector<DeviceProfile> devices{device(100, 0)};
  auto sol = stackelberg_oracle(devices, m);
  auto grid = testing::grid_search(devices, m, 1e-4);
  EXPECT_NEAR(sol.price, 0.01, 1e-12);
  ASSERT_EQ(sol.layers.size(), 1u);
  EXPECT_EQ(sol.layers[0], 40);
  EXPECT_GE(sol.server_utility, grid.utility - 1e-3);
  EXPECT_NEAR(grid.price, 0.01, 1e-12);
}

TEST(Oracle, FlatObjectiveWhenNobodyOffloads) {
  MarketParams m;
  m.beta = 0.0;
  std::vector<DeviceProfile> devices{device(100, 1e4), device(110, 2e4)};
  auto sol = stackelberg_oracle(devices, m);
  EXPECT_TRUE(sol.flat_objective);
  EXPECT_DOUBLE_EQ(sol.server_utility, m.revenue_F);
  EXPECT_DOUBLE_EQ(sol.price, m.price_min);
  for (int l : sol.layers) EXPECT_EQ(l, 0);
}

TEST(Oracle, ErrorPaths) {
  MarketParams m;
  std::vector<DeviceProfile> none;
  EXPECT_THROW(stackelberg_oracle(none, m), std::invalid_argument);
  std::vector<DeviceProfile> one{device(100, 10)};
  EXPECT_THROW(stackelberg_oracle(one, m, 0.0), std::invalid_argument);
}

TEST(Oracle, DominatesFineGridAndIsFollowerStable) {
  Rng rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    ScenarioRanges ranges;
    ranges.market.n_devices = 1 + static_cast<int>(rng.index(10));
    ranges.market.beta = rng.uniform(0.0, 1.0);
    Scenario s = sample_scenario(ranges, 1000 + trial);
    auto sol = stackelberg_oracle(s.devices, s.market);
    auto grid = testing::grid_search(s.devices, s.market, 1e-3);
    EXPECT_GE(sol.server_utility, grid.utility - 1e-3);
    for (std::size_t n = 0; n < s.devices.size(); ++n) {
      double u = device_utility(s.devices[n], sol.layers[n], sol.price, s.market);
      for (int l = 0; l <= layer_cap(s.devices[n], s.market); ++l)
        ASSERT_LE(device_utility(s.devices[n], l, sol.price, s.market), u);
    }
  }
}

TEST(Oracle, ServerUtilityAffineBetweenThresholds) {
  // Between consecutive thresholds every follower keeps its layer count, so
  // the leader's utility falls linearly with slope -sum(L).
  ScenarioRanges ranges;
  Scenario s = sample_scenario(ranges, 0);
  auto lo = evaluate_price(s.devices, 0.3487, s.market);
  auto mid = evaluate_price(s.devices, 0.34875, s.market);
  auto hi = evaluate_price(s.devices, 0.3488, s.market);
  ASSERT_EQ(lo.layers, hi.layers);
  EXPECT_NEAR(mid.server_utility, 0.5 * (lo.server_utility + hi.server_utility), 1e-9);
}

TEST(EvaluatePrice, FillsEverything) {
  MarketParams m;
  std::vector<DeviceProfile> devices{device(100, 10), device(100, 0)};
  auto sol = evaluate_price(devices, 1.0, m);
  EXPECT_EQ(sol.layers, (std::vector<int>{38, 40}));
  EXPECT_EQ(sol.device_utilities.size(), 2u);
  EXPECT_NEAR(sol.device_utilities[0], 68.44522437723423, 1e-12);
  EXPECT_NEAR(sol.server_utility, 1000 - 78 - 0.3 * 4, 1e-12);
}

}  // namespace
}  // namespace gdmstack
