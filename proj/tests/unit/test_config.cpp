#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gdmstack/config.hpp"

namespace gdmstack {
namespace {

TEST(KeyValueConfig, ParsesCommentsAndWhitespace) {
  auto kv = KeyValueConfig::parse_string(
      "# header\n"
      "schema_version = 1\n"
      "\n"
      "  scenario.beta=0.5   # trailing\n"
      "experiment.seeds = 4, 5 ,6\n");
  EXPECT_EQ(kv.find("scenario.beta").value(), "0.5");
  EXPECT_EQ(kv.find("experiment.seeds").value(), "4, 5 ,6");
  EXPECT_FALSE(kv.find("missing").has_value());
}

TEST(KeyValueConfig, RejectsMalformedLines) {
  EXPECT_THROW(KeyValueConfig::parse_string("just words\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("= 3\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/config.cfg"), ConfigError);
}

TEST(ExperimentConfig, DefaultsWhenEmpty) {
  auto c = ExperimentConfig::from_kv(KeyValueConfig{});
  EXPECT_EQ(c.epochs, 500);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(c.solvers, (std::vector<std::string>{"gdm", "ppo", "random"}));
  EXPECT_EQ(c.reward_mode, RewardKind::raw_utility);
  EXPECT_EQ(c.ranges.market.n_devices, 10);
  EXPECT_DOUBLE_EQ(c.gdm.actor_lr, 3e-4);
  EXPECT_DOUBLE_EQ(c.gdm.critic_lr, 1e-3);
  EXPECT_EQ(c.gdm.buffer_capacity, 2048u);
  EXPECT_EQ(c.ppo.batch_size, 64);
  EXPECT_DOUBLE_EQ(c.ppo.clip, 0.2);
  EXPECT_DOUBLE_EQ(c.oracle_epsilon, 1e-6);
}

TEST(ExperimentConfig, ReadsTypedValues) {
  auto c = ExperimentConfig::from_kv(KeyValueConfig::parse_string(
      "scenario.beta = 0.7\n"
      "scenario.n_devices = 4\n"
      "experiment.solvers = random, gdm\n"
      "experiment.seeds = 9\n"
      "experiment.epochs = 12\n"
      "experiment.reward_mode = binary\n"
      "gdm.hidden = 16, 8\n"
      "gdm.variance = posterior\n"
      "gdm.target = noise\n"
      "partition.calibrate = true\n"));
  EXPECT_DOUBLE_EQ(c.ranges.market.beta, 0.7);
  EXPECT_EQ(c.ranges.market.n_devices, 4);
  EXPECT_EQ(c.solvers, (std::vector<std::string>{"random", "gdm"}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{9}));
  EXPECT_EQ(c.epochs, 12);
  EXPECT_EQ(c.gdm.epochs, 12);
  EXPECT_EQ(c.reward_mode, RewardKind::binary_improvement);
  EXPECT_EQ(c.gdm.policy.hidden, (std::vector<int>{16, 8}));
  EXPECT_EQ(c.gdm.policy.variance, ReverseVariance::posterior);
  EXPECT_EQ(c.gdm.policy.target, DenoiserTarget::noise);
  EXPECT_TRUE(c.partition.calibrate);
}

TEST(ExperimentConfig, RoundTripsThroughText) {
  auto c = ExperimentConfig::from_kv(KeyValueConfig::parse_string(
      "scenario.beta = 0.123456789012345\nexperiment.seeds = 3, 1\n"));
  std::string text = c.to_kv().dump();
  auto back = ExperimentConfig::from_kv(KeyValueConfig::parse_string(text));
  EXPECT_EQ(back.to_kv().dump(), text);
  EXPECT_DOUBLE_EQ(back.ranges.market.beta, 0.123456789012345);
  EXPECT_EQ(back.seeds, (std::vector<std::uint64_t>{3, 1}));
}

TEST(ExperimentConfig, ErrorPaths) {
  auto bad = [](const std::string& text) {
    return [text] { ExperimentConfig::from_kv(KeyValueConfig::parse_string(text)); };
  };
  EXPECT_THROW(bad("scenario.betta = 1\n")(), ConfigError);
  EXPECT_THROW(bad("schema_version = 2\n")(), ConfigError);
  EXPECT_THROW(bad("experiment.solvers = gdm, sgd\n")(), ConfigError);
  EXPECT_THROW(bad("experiment.solvers = \n")(), ConfigError);
  EXPECT_THROW(bad("experiment.seeds = \n")(), ConfigError);
  EXPECT_THROW(bad("experiment.epochs = 0\n")(), ConfigError);
  EXPECT_THROW(bad("experiment.epochs = ten\n")(), ConfigError);
  EXPECT_THROW(bad("experiment.reward_mode = shaped\n")(), ConfigError);
  EXPECT_THROW(bad("scenario.capacity_min = 130\n")(), ConfigError);
  EXPECT_THROW(bad("scenario.price_min = 9\n")(), ConfigError);
  EXPECT_THROW(bad("experiment.seeds = -1\n")(), ConfigError);
  EXPECT_THROW(bad("gdm.variance = fixed\n")(), ConfigError);
  EXPECT_THROW(bad("partition.calibrate = maybe\n")(), ConfigError);
  EXPECT_THROW(bad("oracle.epsilon = 0\n")(), ConfigError);
}

TEST(ExperimentConfig, LoadsFromFile) {
  auto path = std::filesystem::temp_directory_path() / "gdmstack_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "experiment.epochs = 33\n";
  }
  EXPECT_EQ(ExperimentConfig::load(path.string()).epochs, 33);
  std::filesystem::remove(path);
}

TEST(ConfigHelpers, SplitAndParse) {
  EXPECT_EQ(split_list(" a, b ,c "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_list("").empty());
  EXPECT_DOUBLE_EQ(parse_number("2.5e-3", "x"), 2.5e-3);
  EXPECT_THROW(parse_number("2.5x", "x"), ConfigError);
  EXPECT_THROW(parse_number("nan", "x"), ConfigError);
  EXPECT_EQ(parse_reward_mode("raw"), RewardKind::raw_utility);
  EXPECT_EQ(parse_reward_mode("binary"), RewardKind::binary_improvement);
  EXPECT_THROW(parse_reward_mode("other"), ConfigError);
}

TEST(ConfigDocs, DefaultConfigFileParses) {
  auto c = ExperimentConfig::load(std::string(GDMSTACK_SOURCE_DIR) + "/configs/default.cfg");
  auto defaults = ExperimentConfig::from_kv(KeyValueConfig{});
  EXPECT_EQ(c.to_kv().dump(), defaults.to_kv().dump());
}

}  // namespace
}  // namespace gdmstack
