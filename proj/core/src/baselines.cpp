#include "gdmstack/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "gdmstack/diffusion.hpp"

namespace gdmstack {

namespace {

DenseNet make_mlp(int input, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> widths{input};
  std::vector<Activation> activations;
  for (int h : hidden) {
    widths.push_back(h);
    activations.push_back(Activation::tanh);
  }
  widths.push_back(1);
  activations.push_back(Activation::identity);
  return DenseNet(std::move(widths), std::move(activations), rng);
}

const double kLogMinStd = std::log(kMinPolicyStd);
const double kLogMaxStd = std::log(kMaxPolicyStd);

}  // namespace

GaussianPolicy::GaussianPolicy(int feature_width, const std::vector<int>& hidden,
                               double initial_std, double price_min,
                               double price_max, Rng& rng)
    : mean_net_(make_mlp(feature_width, hidden, rng)),
      log_std_(0.0),
      price_min_(price_min),
      price_max_(price_max) {
  if (!(initial_std > 0.0)) throw std::invalid_argument("initial std must be > 0");
  set_log_std(std::log(initial_std));
}

Eigen::RowVectorXd GaussianPolicy::mean(const Eigen::MatrixXd& features,
                                        ForwardCache* cache) const {
  return mean_net_.forward(features, cache);
}

double GaussianPolicy::std() const { return std::exp(log_std_); }

void GaussianPolicy::set_log_std(double value) {
  log_std_ = std::clamp(value, kLogMinStd, kLogMaxStd);
}

double GaussianPolicy::price(double action) const {
  return squash_action(action, price_min_, price_max_);
}

DenseNet make_value_net(int feature_width, const std::vector<int>& hidden, Rng& rng) {
  return make_mlp(feature_width, hidden, rng);
}

double gaussian_log_prob(double action, double mean, double std) {
  double z = (action - mean) / std;
  return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

std::pair<double, Eigen::VectorXd> ppo_policy_loss_and_gradient(
    const GaussianPolicy& policy, const RolloutBatch& batch, double clip,
    double entropy_coef) {
  const Eigen::Index n = batch.actions.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  ForwardCache cache;
  Eigen::RowVectorXd mu = policy.mean(batch.features, &cache);
  const double std = policy.std();
  const double var = std * std;

  double objective = 0.0;
  Eigen::RowVectorXd d_mean(n);
  double d_log_std = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double diff = batch.actions[i] - mu[i];
    double log_prob = gaussian_log_prob(batch.actions[i], mu[i], std);
    double ratio = std::exp(log_prob - batch.old_log_probs[i]);
    double adv = batch.advantages[i];
    double unclipped = ratio * adv;
    double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    // d objective_i / d log_prob_i; the clipped branch is flat in the ratio.
    double slope = 0.0;
    if (unclipped <= clipped) {
      objective += unclipped;
      slope = ratio * adv;
    } else {
      objective += clipped;
    }
    d_mean[i] = -inv_n * slope * diff / var;
    d_log_std += -inv_n * slope * (diff * diff / var - 1.0);
  }
  double entropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) +
                   policy.log_std();
  double loss = -objective * inv_n - entropy_coef * entropy;
  d_log_std -= entropy_coef;

  NetGradients grads = policy.mean_net().backward(cache, d_mean);
  Eigen::VectorXd full(grads.params.size() + 1);
  full.head(grads.params.size()) = grads.params;
  full[grads.params.size()] = d_log_std;
  return {loss, full};
}

PpoTrainer::PpoTrainer(GaussianPolicy& policy, DenseNet& value_net, Environment& env,
                       const PpoConfig& config, Rng& rng)
    : policy_(policy),
      value_net_(value_net),
      env_(env),
      config_(config),
      rng_(rng),
      policy_opt_(policy.mean_net().param_count() + 1,
                  AdamConfig{.learning_rate = config.learning_rate}),
      value_opt_(value_net.param_count(),
                 AdamConfig{.learning_rate = config.learning_rate}) {
  if (config_.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config_.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config_.update_passes < 1)
    throw std::invalid_argument("update_passes must be >= 1");
  if (policy_.feature_width() != env_.feature_width() ||
      value_net_.input_width() != env_.feature_width())
    throw std::invalid_argument("policy, value net and environment disagree on features");
}

double PpoTrainer::update(RolloutBatch& batch) {
  const double n = static_cast<double>(batch.actions.size());
  batch.advantages = batch.rewards - value_net_.forward(batch.features);

  double value_loss = 0.0;
  for (int pass = 0; pass < config_.update_passes; ++pass) {
    auto [loss, grads] = ppo_policy_loss_and_gradient(policy_, batch, config_.clip,
                                                      config_.entropy_coef);
    if (!std::isfinite(loss) || !grads.allFinite())
      throw TrainingDiverged("ppo policy loss became non-finite");
    Eigen::VectorXd params(grads.size());
    params.head(grads.size() - 1) = policy_.mean_net().params();
    params[grads.size() - 1] = policy_.log_std();
    policy_opt_.step(params, grads);
    policy_.mean_net().params() = params.head(grads.size() - 1);
    policy_.set_log_std(params[grads.size() - 1]);

    ForwardCache cache;
    Eigen::RowVectorXd diff = value_net_.forward(batch.features, &cache) - batch.rewards;
    value_loss = diff.squaredNorm() / n;
    if (!std::isfinite(value_loss))
      throw TrainingDiverged("ppo value loss became non-finite");
    value_opt_.step(value_net_.params(),
                    value_net_.backward(cache, (2.0 / n) * diff).params);
  }
  return value_loss;
}

TrainingLog PpoTrainer::run() {
  TrainingLog log;
  log.reserve(static_cast<std::size_t>(config_.epochs));
  const int width = env_.feature_width();
  RolloutBatch batch;
  int filled = 0;
  auto reset_batch = [&] {
    batch.features.resize(width, config_.batch_size);
    batch.actions.resize(config_.batch_size);
    batch.rewards.resize(config_.batch_size);
    batch.old_log_probs.resize(config_.batch_size);
    filled = 0;
  };
  reset_batch();

  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    Eigen::VectorXd features = state_features(env_.observe(rng_), env_.scenario());
    double mu = policy_.mean(features)[0];
    double std = policy_.std();
    double action = mu + std * rng_.normal();
    double price = policy_.price(action);
    StepResult result = env_.act(price);

    batch.features.col(filled) = features;
    batch.actions[filled] = action;
    batch.rewards[filled] = result.reward;
    batch.old_log_probs[filled] = gaussian_log_prob(action, mu, std);
    ++filled;

    EpochRecord record{epoch, price, result.server_utility, result.reward, 0.0};
    if (filled == config_.batch_size) {
      try {
        record.loss = update(batch);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged(
            fmt::format("ppo diverged at epoch {}: {}", epoch, e.what()));
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(
            fmt::format("ppo diverged at epoch {}: {}", epoch, e.what()));
      }
      reset_batch();
    }
    log.push_back(record);
  }
  return log;
}

TrainingLog random_search(Environment& env, int epochs, std::uint64_t seed) {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  Rng rng(seed);
  const auto& market = env.scenario().market;
  TrainingLog log;
  log.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    env.observe(rng);
    double price = rng.uniform(market.price_min, market.price_max);
    StepResult result = env.act(price);
    log.push_back({epoch, price, result.server_utility, result.reward, 0.0});
  }
  return log;
}

}  // namespace gdmstack
