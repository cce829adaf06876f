#pragma once

// Diffusion policy for the leader's price. A denoiser conditioned on the
// game-state features turns Gaussian noise into a normalized action in T
// reverse steps; an actor-critic loop trains it by ascending a learned
// Q-function through the whole reverse chain.

#include <Eigen/Core>
#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "gdmstack/env.hpp"
#include "gdmstack/nn.hpp"
#include "gdmstack/rng.hpp"
#include "gdmstack/training_log.hpp"

namespace gdmstack {

/// Variance of the noise injected by reverse step t (none at t = 1).
enum class ReverseVariance {
  beta,       ///< sigma_t^2 = beta_t
  posterior,  ///< sigma_t^2 = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
};

/// What the denoiser network's output means.
enum class DenoiserTarget {
  noise,         ///< the network output is the predicted noise directly
  clean_action,  ///< estimate of a_0; the noise is derived from it
};

struct DiffusionSchedule {
  std::vector<double> beta;       ///< index t-1 holds beta_t
  std::vector<double> alpha;      ///< 1 - beta_t
  std::vector<double> alpha_bar;  ///< prod_{s<=t} alpha_s
  std::vector<double> sigma;      ///< reverse-step noise scale
  ReverseVariance variance = ReverseVariance::beta;

  int steps() const { return static_cast<int>(beta.size()); }
  /// alpha_bar_{t} with alpha_bar_0 = 1.
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }

  /// Throws std::invalid_argument unless every beta lies in (0, 1).
  static DiffusionSchedule from_betas(std::vector<double> betas,
                                      ReverseVariance variance = ReverseVariance::beta);

  /// Linear betas from beta_start to beta_end. If the resulting alpha_bar_T
  /// exceeds `alpha_bar_target`, beta_end is raised (bisection, capped below
  /// 1) until it does not.
  static DiffusionSchedule linear(int steps, double beta_start, double beta_end,
                                  double alpha_bar_target = 0.05,
                                  ReverseVariance variance = ReverseVariance::beta);
};

/// sqrt(alpha_bar_t) * action0 + sqrt(1 - alpha_bar_t) * noise.
double forward_noise(const DiffusionSchedule& schedule, double action0, int t,
                     double noise);

/// [t / T, sin(pi t / T), cos(pi t / T)].
Eigen::Vector3d timestep_embedding(int t, int steps);
inline constexpr int kTimestepEmbeddingWidth = 3;

/// Predicts the noise in a batch of noisy actions at step t.
using NoisePredictor = std::function<Eigen::RowVectorXd(
    const Eigen::RowVectorXd& noisy, int t, const Eigen::MatrixXd& features)>;

/// Pre-drawn randomness for one batch of reverse chains.
struct ChainNoise {
  Eigen::RowVectorXd terminal;           ///< a_T
  std::vector<Eigen::RowVectorXd> step;  ///< z for step t at index t-1
};

ChainNoise draw_chain_noise(int steps, Eigen::Index batch, Rng& rng);

/// Runs the reverse recursion
///   a_{t-1} = (a_t - beta_t / sqrt(1 - alpha_bar_t) * eps(a_t, t, s)) / sqrt(alpha_t)
///             + sigma_t z_t
/// from a_T down to a_0 and returns a_0 (unsquashed). Throws std::domain_error
/// on a non-finite intermediate.
Eigen::RowVectorXd reverse_chain(const DiffusionSchedule& schedule,
                                 const NoisePredictor& predictor,
                                 const Eigen::MatrixXd& features,
                                 const ChainNoise& noise);

/// Affine map of clamp(a, -1, 1) onto [price_min, price_max].
double squash_action(double normalized, double price_min, double price_max);
/// Inverse of squash_action on the interior.
double normalize_price(double price, double price_min, double price_max);

struct DiffusionPolicyConfig {
  int steps = 5;
  double beta_start = 1e-4;
  double beta_end = 0.2;
  double alpha_bar_target = 0.05;
  ReverseVariance variance = ReverseVariance::beta;
  DenoiserTarget target = DenoiserTarget::clean_action;
  std::vector<int> hidden{64, 64};
  Activation hidden_activation = Activation::swish;
  Activation output_activation = Activation::identity;
};

class DiffusionPolicy {
 public:
  /// Intermediate values of a batch of chains, kept for backprop.
  struct Trace {
    std::vector<Eigen::RowVectorXd> noisy;  ///< a_t at index t-1
    std::vector<ForwardCache> caches;       ///< denoiser pass at step t
    std::vector<Eigen::RowVectorXd> raw;    ///< denoiser output at step t
    Eigen::RowVectorXd clean;               ///< a_0
  };

  DiffusionPolicy(DenseNet denoiser, DiffusionSchedule schedule,
                  DenoiserTarget target, int feature_width, double price_min,
                  double price_max);

  static DiffusionPolicy create(const DiffusionPolicyConfig& config,
                                int feature_width, double price_min,
                                double price_max, Rng& rng);

  /// Rows: noisy action, timestep embedding, features.
  Eigen::MatrixXd denoiser_input(const Eigen::RowVectorXd& noisy, int t,
                                 const Eigen::MatrixXd& features) const;

  Eigen::RowVectorXd predict_noise(const Eigen::RowVectorXd& noisy, int t,
                                   const Eigen::MatrixXd& features) const;

  /// a_0 for a batch of feature columns under the given noise.
  Eigen::RowVectorXd generate(const Eigen::MatrixXd& features,
                              const ChainNoise& noise, Trace* trace = nullptr) const;

  /// Gradient of sum(upstream .* a_0) with respect to the denoiser
  /// parameters, through every reverse step.
  Eigen::VectorXd backprop(const Trace& trace,
                           const Eigen::RowVectorXd& upstream) const;

  double squash(double normalized) const {
    return squash_action(normalized, price_min_, price_max_);
  }

  DenseNet& denoiser() { return denoiser_; }
  const DenseNet& denoiser() const { return denoiser_; }
  const DiffusionSchedule& schedule() const { return schedule_; }
  DenoiserTarget target() const { return target_; }
  int feature_width() const { return feature_width_; }
  double price_min() const { return price_min_; }
  double price_max() const { return price_max_; }

 private:
  DenseNet denoiser_;
  DiffusionSchedule schedule_;
  DenoiserTarget target_;
  int feature_width_;
  double price_min_;
  double price_max_;
};

/// One price drawn from the policy for a single state.
double sample_action(const DiffusionPolicy& policy,
                     const Eigen::VectorXd& features, Rng& rng);

/// Q(s, u) over state features and the normalized action u in [-1, 1].
class Critic {
 public:
  Critic(int feature_width, const std::vector<int>& hidden, Rng& rng);
  explicit Critic(DenseNet net);

  Eigen::MatrixXd input(const Eigen::MatrixXd& features,
                        const Eigen::RowVectorXd& actions) const;
  Eigen::RowVectorXd evaluate(const Eigen::MatrixXd& features,
                              const Eigen::RowVectorXd& actions,
                              ForwardCache* cache = nullptr) const;

  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }
  int feature_width() const { return net_.input_width() - 1; }

 private:
  DenseNet net_;
};

struct Transition {
  Eigen::VectorXd features;
  double action = 0.0;  ///< normalized, in [-1, 1]
  double reward = 0.0;
  Eigen::VectorXd next_features;
  bool terminal = true;
};

/// Bounded FIFO store of transitions; the oldest record is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition transition);
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  /// Index 0 is the oldest retained record.
  const Transition& operator[](std::size_t i) const { return records_[i]; }
  /// Uniform draws with replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> records_;
};

struct GdmConfig {
  int epochs = 500;
  std::size_t buffer_capacity = 2048;
  int batch_size = 64;
  int warmup = 64;  ///< transitions collected before the first update
  int updates_per_epoch = 1;  ///< actor steps per epoch
  int critic_updates_per_epoch = 16;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double max_grad_norm = 0.0;
  std::vector<int> critic_hidden{64, 64};
  double explore_start = 0.2;
  double explore_end = 0.01;
  double explore_anneal_fraction = 0.5;
  double discount = 0.95;  ///< bootstrap discount when the horizon exceeds 1
  DiffusionPolicyConfig policy;
};

/// Exploration scale at a 1-based epoch under linear annealing.
double exploration_scale(const GdmConfig& config, int epoch);

/// Actor-critic trainer for a diffusion policy on one environment.
class GdmTrainer {
 public:
  GdmTrainer(DiffusionPolicy& policy, Critic& critic, Environment& env,
             const GdmConfig& config, Rng& rng);

  /// Runs config.epochs epochs and returns one record per epoch.
  TrainingLog run();

  /// Interacts once with the environment and stores the transition.
  EpochRecord collect(int epoch);
  /// One regression step of the critic on a replay batch; returns the MSE
  /// before the step.
  double update_critic();
  /// One ascent step of the policy on Q through the reverse chain; returns
  /// the mean Q of the batch before the step.
  double update_actor();

  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& buffer() { return buffer_; }

 private:
  Eigen::MatrixXd gather_features(const std::vector<std::size_t>& idx,
                                  bool next) const;

  DiffusionPolicy& policy_;
  Critic& critic_;
  Environment& env_;
  GdmConfig config_;
  Rng& rng_;
  ReplayBuffer buffer_;
  Adam actor_opt_;
  Adam critic_opt_;
};

/// Actor loss (negative mean Q over the batch) for fixed noise, together with
/// its gradient with respect to the denoiser parameters. The critic sees a_0
/// clamped to [-1, 1]; for a clamped sample the gradient is kept only when it
/// points back into the interval.
std::pair<double, Eigen::VectorXd> actor_loss_and_gradient(
    const DiffusionPolicy& policy, const Critic& critic,
    const Eigen::MatrixXd& features, const ChainNoise& noise);

}  // namespace gdmstack
