#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gdmstack/gradcheck.hpp"
#include "gdmstack/rng.hpp"

namespace gdmstack {
namespace {

TEST(Rng, ReproducibleAndForkIndependent) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
  Rng f1 = Rng(5).fork(1), f2 = Rng(5).fork(2);
  EXPECT_NE(f1.uniform(), f2.uniform());
  EXPECT_EQ(Rng(5).fork(1).uniform(), Rng(5).fork(1).uniform());
  EXPECT_NE(mix_seed(0), mix_seed(1));
}

TEST(Rng, RangesAndMoments) {
  Rng rng(9);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(2.0, 3.0);
    ASSERT_GE(u, 2.0);
    ASSERT_LT(u, 3.0);
    double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.index(7));
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(*seen.rbegin(), 6u);
  EXPECT_DOUBLE_EQ(rng.uniform(1.0, 1.0), 1.0);
}

TEST(GradCheck, EveryArchitecturePasses) {
  auto entries = run_gradient_checks(ExperimentConfig{}, 0);
  std::set<std::string> names;
  for (const auto& e : entries) {
    names.insert(e.name);
    EXPECT_TRUE(e.passed()) << e.name << " " << e.max_relative_error;
    EXPECT_GT(e.checked, 0u);
  }
  for (const char* n : {"denoiser", "critic", "ppo_mean", "ppo_value", "actor_chain"})
    EXPECT_TRUE(names.count(n)) << n;
}

}  // namespace
}  // namespace gdmstack
