#include <benchmark/benchmark.h>

#include <vector>

#include "gdmstack/diffusion.hpp"
#include "gdmstack/env.hpp"
#include "gdmstack/game.hpp"
#include "gdmstack/rng.hpp"

namespace {

using namespace gdmstack;

void BM_BestResponse(benchmark::State& state) {
  MarketParams m;
  DeviceProfile d{105.0, 10.0};
  double price = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(best_response(d, price, m));
    price = price > 4.9 ? 0.01 : price + 0.013;
  }
}
BENCHMARK(BM_BestResponse);

void BM_Oracle(benchmark::State& state) {
  ScenarioRanges r;
  r.market.n_devices = static_cast<int>(state.range(0));
  Scenario s = sample_scenario(r, 0);
  for (auto _ : state) benchmark::DoNotOptimize(stackelberg_oracle(s.devices, s.market));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Oracle)->RangeMultiplier(4)->Range(1, 256)->Complexity();

DiffusionPolicy default_policy(Rng& rng) {
  return DiffusionPolicy::create(DiffusionPolicyConfig{}, 11, 0.01, 5.0, rng);
}

void BM_DenoiserForward(benchmark::State& state) {
  Rng rng(0);
  auto policy = default_policy(rng);
  auto batch = state.range(0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(policy.denoiser().input_width(), batch);
  for (auto _ : state) benchmark::DoNotOptimize(policy.denoiser().forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForward)->Arg(1)->Arg(64)->Arg(256);

void BM_ChainForwardBackward(benchmark::State& state) {
  Rng rng(0);
  auto policy = default_policy(rng);
  auto batch = state.range(0);
  Eigen::MatrixXd features = Eigen::MatrixXd::Random(11, batch);
  ChainNoise noise = draw_chain_noise(policy.schedule().steps(), batch, rng);
  Eigen::RowVectorXd upstream = Eigen::RowVectorXd::Ones(batch);
  for (auto _ : state) {
    DiffusionPolicy::Trace trace;
    policy.generate(features, noise, &trace);
    benchmark::DoNotOptimize(policy.backprop(trace, upstream));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ChainForwardBackward)->Arg(64)->Arg(256);

void BM_SampleAction(benchmark::State& state) {
  Rng rng(0);
  auto policy = default_policy(rng);
  Eigen::VectorXd features = Eigen::VectorXd::Random(11);
  for (auto _ : state) benchmark::DoNotOptimize(sample_action(policy, features, rng));
}
BENCHMARK(BM_SampleAction);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point is defined here.
BENCHMARK_MAIN();
