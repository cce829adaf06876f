#pragma once

// Comparison solvers: a clipped-ratio PPO actor-critic with a Gaussian policy
// over the normalized price, and uniform random search. Both emit the same
// per-epoch log as the diffusion trainer.

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gdmstack/env.hpp"
#include "gdmstack/nn.hpp"
#include "gdmstack/rng.hpp"
#include "gdmstack/training_log.hpp"

namespace gdmstack {

inline constexpr double kMinPolicyStd = 1e-3;
inline constexpr double kMaxPolicyStd = 1.0;

/// Gaussian over the pre-squash normalized action. The executed action is
/// clamp(a, -1, 1) mapped affinely onto the price bounds.
class GaussianPolicy {
 public:
  GaussianPolicy(int feature_width, const std::vector<int>& hidden,
                 double initial_std, double price_min, double price_max, Rng& rng);

  Eigen::RowVectorXd mean(const Eigen::MatrixXd& features,
                          ForwardCache* cache = nullptr) const;
  double std() const;
  /// log_std, clamped so the std stays within [kMinPolicyStd, kMaxPolicyStd].
  double log_std() const { return log_std_; }
  void set_log_std(double value);

  double price(double action) const;

  DenseNet& mean_net() { return mean_net_; }
  const DenseNet& mean_net() const { return mean_net_; }
  int feature_width() const { return mean_net_.input_width(); }
  double price_min() const { return price_min_; }
  double price_max() const { return price_max_; }

 private:
  DenseNet mean_net_;
  double log_std_;
  double price_min_;
  double price_max_;
};

/// State-value baseline V(s).
DenseNet make_value_net(int feature_width, const std::vector<int>& hidden, Rng& rng);

struct PpoConfig {
  int epochs = 500;
  int batch_size = 64;     ///< rollouts per policy update
  int update_passes = 10;  ///< gradient passes over each batch
  double clip = 0.2;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  double initial_std = 0.5;
  std::vector<int> hidden{64, 64};
};

struct RolloutBatch {
  Eigen::MatrixXd features;    ///< one column per rollout
  Eigen::RowVectorXd actions;  ///< pre-squash samples
  Eigen::RowVectorXd rewards;
  Eigen::RowVectorXd old_log_probs;
  Eigen::RowVectorXd advantages;
};

/// Clipped surrogate loss (negated, with entropy bonus) and its gradient.
/// The gradient vector holds the mean-net parameters followed by log_std.
std::pair<double, Eigen::VectorXd> ppo_policy_loss_and_gradient(
    const GaussianPolicy& policy, const RolloutBatch& batch, double clip,
    double entropy_coef);

double gaussian_log_prob(double action, double mean, double std);

class PpoTrainer {
 public:
  PpoTrainer(GaussianPolicy& policy, DenseNet& value_net, Environment& env,
             const PpoConfig& config, Rng& rng);

  TrainingLog run();

 private:
  /// Returns the value loss of the final pass.
  double update(RolloutBatch& batch);

  GaussianPolicy& policy_;
  DenseNet& value_net_;
  Environment& env_;
  PpoConfig config_;
  Rng& rng_;
  Adam policy_opt_;
  Adam value_opt_;
};

/// Uniform random price each epoch.
TrainingLog random_search(Environment& env, int epochs, std::uint64_t seed);

}  // namespace gdmstack
