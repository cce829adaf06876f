#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gdmstack/env.hpp"
#include "oracles.hpp"

namespace gdmstack {
namespace {

TEST(SampleScenario, ZeroWidthRangesGiveIdenticalDevices) {
  ScenarioRanges r;
  r.market.n_devices = 3;
  r.capacity_min = r.capacity_max = 90.0;
  r.alpha_min = r.alpha_max = 10.0;
  Scenario s = sample_scenario(r, 7);
  ASSERT_EQ(s.devices.size(), 3u);
  for (const auto& d : s.devices) {
    EXPECT_DOUBLE_EQ(d.capacity, 90.0);
    EXPECT_DOUBLE_EQ(d.alpha, 10.0);
  }
}

TEST(SampleScenario, DeterministicPerSeed) {
  ScenarioRanges r;
  Scenario a = sample_scenario(r, 0);
  Scenario b = sample_scenario(r, 0);
  Scenario c = sample_scenario(r, 1);
  bool differs = false;
  for (int n = 0; n < r.market.n_devices; ++n) {
    EXPECT_EQ(a.devices[n].capacity, b.devices[n].capacity);
    EXPECT_EQ(a.devices[n].alpha, b.devices[n].alpha);
    differs |= a.devices[n].capacity != c.devices[n].capacity;
  }
  EXPECT_TRUE(differs);
}

TEST(SampleScenario, DrawsInsideRanges) {
  ScenarioRanges r;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (const auto& d : sample_scenario(r, seed).devices) {
      EXPECT_GE(d.capacity, 90.0);
      EXPECT_LE(d.capacity, 120.0);
      EXPECT_GE(d.alpha, 5.0);
      EXPECT_LE(d.alpha, 15.0);
    }
}

TEST(SampleScenario, InvertedRangesThrow) {
  ScenarioRanges r;
  r.capacity_min = 130.0;
  EXPECT_THROW(sample_scenario(r, 0), std::invalid_argument);
  r = ScenarioRanges{};
  r.alpha_min = 20.0;
  EXPECT_THROW(sample_scenario(r, 0), std::invalid_argument);
}

TEST(Reset, DeterministicAndBestResponding) {
  Scenario s = sample_scenario({}, 0);
  Rng a(9), b(9);
  GameState x = reset(s, a);
  GameState y = reset(s, b);
  EXPECT_EQ(x, y);
  for (std::size_t n = 0; n < s.devices.size(); ++n)
    EXPECT_EQ(x.layer_prev[n],
              testing::enumerate_best_response(s.devices[n], x.price_prev, s.market));
}

TEST(Reset, DegenerateBounds) {
  ScenarioRanges r;
  r.market.price_min = r.market.price_max = 1.0;
  Scenario s = sample_scenario(r, 0);
  Rng rng(0);
  GameState st = reset(s, rng);
  EXPECT_DOUBLE_EQ(st.price_prev, 1.0);
  EXPECT_EQ(st.layer_prev, best_responses(s.devices, 1.0, s.market));
}

TEST(Reset, MatchesGoldenInitialState) {
  std::ifstream in(std::string(GDMSTACK_FIXTURE_DIR) + "/default_initial_state.txt");
  ASSERT_TRUE(in) << "missing fixture";
  std::string key;
  double price = 0.0;
  in >> key >> price;
  ASSERT_EQ(key, "price_prev");
  in >> key;
  ASSERT_EQ(key, "layer_prev");
  std::vector<int> layers;
  for (int l; in >> l;) layers.push_back(l);

  Scenario s = sample_scenario({}, 0);
  Rng rng(0);
  GameState st = reset(s, rng);
  EXPECT_NEAR(st.price_prev, price, 1e-15);
  EXPECT_EQ(st.layer_prev, layers);
  for (std::size_t n = 0; n < layers.size(); ++n)
    EXPECT_EQ(layers[n], testing::enumerate_best_response(s.devices[n], price, s.market));
}

TEST(Step, RewardModes) {
  MarketParams m;
  m.n_devices = 2;
  Scenario s{m, {{100, 10}, {100, 10}}, 0};
  // Both devices run 38 layers at P=1, so the leader earns 921.6.
  GameState worse{5.0, {40, 40}};
  double worse_u = server_utility(5.0, worse.layer_prev, m);
  ASSERT_LT(worse_u, 921.6);

  auto raw = step(worse, 1.0, s, {RewardKind::raw_utility, 1000.0});
  EXPECT_NEAR(raw.server_utility, 921.6, 1e-12);
  EXPECT_NEAR(raw.reward, 0.9216, 1e-15);
  EXPECT_EQ(raw.next.layer_prev, (std::vector<int>{38, 38}));
  EXPECT_DOUBLE_EQ(raw.next.price_prev, 1.0);

  auto up = step(worse, 1.0, s, {RewardKind::binary_improvement, 1.0});
  EXPECT_EQ(up.reward, 1.0);
  auto down = step(raw.next, 5.0, s, {RewardKind::binary_improvement, 1.0});
  EXPECT_EQ(down.reward, 0.0);
  auto same = step(raw.next, 1.0, s, {RewardKind::binary_improvement, 1.0});
  EXPECT_EQ(same.reward, 0.0);
}

TEST(Step, OutOfBoundsActionThrows) {
  Scenario s = sample_scenario({}, 0);
  Rng rng(0);
  GameState st = reset(s, rng);
  RewardMode mode;
  EXPECT_THROW(step(st, 0.0, s, mode), std::out_of_range);
  EXPECT_THROW(step(st, 5.01, s, mode), std::out_of_range);
  EXPECT_THROW(step(st, std::nan(""), s, mode), std::out_of_range);
  EXPECT_NO_THROW(step(st, 5.0, s, mode));
}

TEST(StateFeatures, Boundaries) {
  ScenarioRanges r;
  r.market.n_devices = 3;
  Scenario s = sample_scenario(r, 0);
  Eigen::VectorXd lo = state_features({0.01, {0, 0, 0}}, s);
  EXPECT_EQ(lo, (Eigen::VectorXd(4) << -1, 0, 0, 0).finished());
  Eigen::VectorXd hi = state_features({5.0, {40, 40, 40}}, s);
  EXPECT_EQ(hi, (Eigen::VectorXd(4) << 1, 1, 1, 1).finished());
  Eigen::VectorXd mid = state_features({2.505, {20, 20, 20}}, s);
  EXPECT_NEAR(mid[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(mid[1], 0.5);
}

TEST(StateFeatures, StayInUnitBox) {
  Scenario s = sample_scenario({}, 3);
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd f = state_features(reset(s, rng), s);
    ASSERT_GE(f.minCoeff(), -1.0);
    ASSERT_LE(f.maxCoeff(), 1.0);
    ASSERT_GE(f.tail(f.size() - 1).minCoeff(), 0.0);
  }
}

TEST(Environment, EpisodesResetAfterHorizon) {
  Environment env(sample_scenario({}, 0), {}, 2);
  EXPECT_THROW(env.act(1.0), std::logic_error);
  Rng rng(0);
  GameState first = env.observe(rng);
  env.act(1.0);
  EXPECT_FALSE(env.episode_done());
  GameState second = env.observe(rng);
  EXPECT_DOUBLE_EQ(second.price_prev, 1.0);
  env.act(2.0);
  EXPECT_TRUE(env.episode_done());
  GameState third = env.observe(rng);
  EXPECT_NE(third.price_prev, 2.0);
  EXPECT_NE(first, third);
}

TEST(Environment, RejectsBadArguments) {
  Scenario s = sample_scenario({}, 0);
  EXPECT_THROW(Environment(s, {}, 0), std::invalid_argument);
  EXPECT_THROW(Environment(s, {RewardKind::raw_utility, 0.0}), std::invalid_argument);
  s.devices.pop_back();
  EXPECT_THROW(Environment(s, {}), std::invalid_argument);
}

}  // namespace
}  // namespace gdmstack
