#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdmstack/config.hpp"

namespace gdmstack {

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool passed() const { return max_relative_error <= tolerance; }
};

inline constexpr double kNetGradTolerance = 1e-4;
inline constexpr double kChainGradTolerance = 1e-3;
inline constexpr double kGradCheckStep = 1e-4;

/// Central-difference checks for every network the solvers build from
/// `config` (denoiser, critic, PPO mean and value nets, PPO surrogate) plus
/// the actor gradient through the reverse chain of a tiny diffusion policy.
std::vector<GradCheckEntry> run_gradient_checks(const ExperimentConfig& config,
                                                std::uint64_t seed);

}  // namespace gdmstack
