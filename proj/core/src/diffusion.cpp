#include "gdmstack/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace gdmstack {

namespace {

double final_alpha_bar(const std::vector<double>& betas) {
  double product = 1.0;
  for (double b : betas) product *= 1.0 - b;
  return product;
}

std::vector<double> linear_betas(int steps, double start, double end) {
  std::vector<double> betas(steps);
  if (steps == 1) {
    betas[0] = end;
    return betas;
  }
  for (int i = 0; i < steps; ++i)
    betas[i] = start + (end - start) * static_cast<double>(i) / (steps - 1);
  return betas;
}

void require_finite(const Eigen::RowVectorXd& values, int t) {
  if (!values.allFinite())
    throw std::domain_error(
        fmt::format("non-finite value in the reverse chain at step {}", t));
}

}  // namespace

DiffusionSchedule DiffusionSchedule::from_betas(std::vector<double> betas,
                                                ReverseVariance variance) {
  if (betas.empty()) throw std::invalid_argument("a schedule needs at least one step");
  for (double b : betas)
    if (!(b > 0.0 && b < 1.0))
      throw std::invalid_argument(fmt::format("beta {} outside (0, 1)", b));
  DiffusionSchedule s;
  s.variance = variance;
  s.beta = std::move(betas);
  double running = 1.0;
  for (double b : s.beta) {
    s.alpha.push_back(1.0 - b);
    running *= 1.0 - b;
    s.alpha_bar.push_back(running);
  }
  for (int t = 1; t <= s.steps(); ++t) {
    double var = 0.0;
    if (t > 1) {
      var = s.beta[t - 1];
      if (variance == ReverseVariance::posterior)
        var *= (1.0 - s.alpha_bar_at(t - 1)) / (1.0 - s.alpha_bar_at(t));
    }
    s.sigma.push_back(std::sqrt(var));
  }
  return s;
}

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start,
                                            double beta_end,
                                            double alpha_bar_target,
                                            ReverseVariance variance) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("need 0 < beta_start <= beta_end < 1");
  if (!(alpha_bar_target > 0.0 && alpha_bar_target < 1.0))
    throw std::invalid_argument("alpha_bar_target must lie in (0, 1)");

  double end = beta_end;
  if (final_alpha_bar(linear_betas(steps, beta_start, end)) > alpha_bar_target) {
    double lo = beta_end;
    double hi = 0.999;
    if (final_alpha_bar(linear_betas(steps, beta_start, hi)) > alpha_bar_target)
      throw std::invalid_argument(fmt::format(
          "{} steps starting at beta {} cannot reach alpha_bar {}", steps,
          beta_start, alpha_bar_target));
    for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
      double mid = 0.5 * (lo + hi);
      if (final_alpha_bar(linear_betas(steps, beta_start, mid)) > alpha_bar_target)
        lo = mid;
      else
        hi = mid;
    }
    end = hi;
  }
  return from_betas(linear_betas(steps, beta_start, end), variance);
}

double forward_noise(const DiffusionSchedule& schedule, double action0, int t,
                     double noise) {
  if (t < 1 || t > schedule.steps())
    throw std::out_of_range(
        fmt::format("diffusion step {} outside [1, {}]", t, schedule.steps()));
  double ab = schedule.alpha_bar[t - 1];
  return std::sqrt(ab) * action0 + std::sqrt(1.0 - ab) * noise;
}

Eigen::Vector3d timestep_embedding(int t, int steps) {
  double phase = std::numbers::pi * t / steps;
  return {static_cast<double>(t) / steps, std::sin(phase), std::cos(phase)};
}

ChainNoise draw_chain_noise(int steps, Eigen::Index batch, Rng& rng) {
  ChainNoise noise;
  noise.terminal.resize(batch);
  for (Eigen::Index i = 0; i < batch; ++i) noise.terminal[i] = rng.normal();
  noise.step.assign(steps, Eigen::RowVectorXd::Zero(batch));
  for (int t = steps; t >= 2; --t)
    for (Eigen::Index i = 0; i < batch; ++i) noise.step[t - 1][i] = rng.normal();
  return noise;
}

Eigen::RowVectorXd reverse_chain(const DiffusionSchedule& schedule,
                                 const NoisePredictor& predictor,
                                 const Eigen::MatrixXd& features,
                                 const ChainNoise& noise) {
  Eigen::RowVectorXd a = noise.terminal;
  for (int t = schedule.steps(); t >= 1; --t) {
    Eigen::RowVectorXd eps = predictor(a, t, features);
    double k1 = 1.0 / std::sqrt(schedule.alpha[t - 1]);
    double k2 = schedule.beta[t - 1] / std::sqrt(1.0 - schedule.alpha_bar[t - 1]);
    a = k1 * (a - k2 * eps);
    if (t > 1) a += schedule.sigma[t - 1] * noise.step[t - 1];
    require_finite(a, t);
  }
  return a;
}

double squash_action(double normalized, double price_min, double price_max) {
  double u = std::clamp(normalized, -1.0, 1.0);
  double price = price_min + (price_max - price_min) * 0.5 * (u + 1.0);
  return std::clamp(price, price_min, price_max);
}

double normalize_price(double price, double price_min, double price_max) {
  double width = price_max - price_min;
  return width > 0.0 ? 2.0 * (price - price_min) / width - 1.0 : 0.0;
}

DiffusionPolicy::DiffusionPolicy(DenseNet denoiser, DiffusionSchedule schedule,
                                 DenoiserTarget target, int feature_width,
                                 double price_min, double price_max)
    : denoiser_(std::move(denoiser)),
      schedule_(std::move(schedule)),
      target_(target),
      feature_width_(feature_width),
      price_min_(price_min),
      price_max_(price_max) {
  if (denoiser_.input_width() != 1 + kTimestepEmbeddingWidth + feature_width_)
    throw std::invalid_argument(fmt::format(
        "denoiser input width {} != 1 + {} + {}", denoiser_.input_width(),
        kTimestepEmbeddingWidth, feature_width_));
  if (denoiser_.output_width() != 1)
    throw std::invalid_argument("denoiser must have a single output");
}

DiffusionPolicy DiffusionPolicy::create(const DiffusionPolicyConfig& config,
                                        int feature_width, double price_min,
                                        double price_max, Rng& rng) {
  std::vector<int> widths{1 + kTimestepEmbeddingWidth + feature_width};
  std::vector<Activation> activations;
  for (int h : config.hidden) {
    widths.push_back(h);
    activations.push_back(config.hidden_activation);
  }
  widths.push_back(1);
  activations.push_back(config.output_activation);
  return DiffusionPolicy(
      DenseNet(std::move(widths), std::move(activations), rng),
      DiffusionSchedule::linear(config.steps, config.beta_start, config.beta_end,
                                config.alpha_bar_target, config.variance),
      config.target, feature_width, price_min, price_max);
}

Eigen::MatrixXd DiffusionPolicy::denoiser_input(const Eigen::RowVectorXd& noisy,
                                                int t,
                                                const Eigen::MatrixXd& features) const {
  if (features.rows() != feature_width_ || features.cols() != noisy.cols())
    throw std::invalid_argument(fmt::format(
        "features are {}x{}, expected {}x{}", features.rows(), features.cols(),
        feature_width_, noisy.cols()));
  Eigen::MatrixXd input(denoiser_.input_width(), noisy.cols());
  input.row(0) = noisy;
  input.middleRows(1, kTimestepEmbeddingWidth).colwise() =
      timestep_embedding(t, schedule_.steps());
  input.bottomRows(feature_width_) = features;
  return input;
}

Eigen::RowVectorXd DiffusionPolicy::predict_noise(
    const Eigen::RowVectorXd& noisy, int t, const Eigen::MatrixXd& features) const {
  Eigen::RowVectorXd raw = denoiser_.forward(denoiser_input(noisy, t, features));
  if (target_ == DenoiserTarget::noise) return raw;
  double ab = schedule_.alpha_bar[t - 1];
  return (noisy - std::sqrt(ab) * raw) / std::sqrt(1.0 - ab);
}

Eigen::RowVectorXd DiffusionPolicy::generate(const Eigen::MatrixXd& features,
                                             const ChainNoise& noise,
                                             Trace* trace) const {
  const int steps = schedule_.steps();
  if (trace) {
    trace->noisy.assign(steps, {});
    trace->caches.assign(steps, {});
    trace->raw.assign(steps, {});
  }
  Eigen::RowVectorXd a = noise.terminal;
  for (int t = steps; t >= 1; --t) {
    ForwardCache cache;
    Eigen::RowVectorXd raw =
        denoiser_.forward(denoiser_input(a, t, features), trace ? &cache : nullptr);
    const double ab = schedule_.alpha_bar[t - 1];
    Eigen::RowVectorXd eps = target_ == DenoiserTarget::noise
                                 ? raw
                                 : Eigen::RowVectorXd((a - std::sqrt(ab) * raw) /
                                                      std::sqrt(1.0 - ab));
    double k1 = 1.0 / std::sqrt(schedule_.alpha[t - 1]);
    double k2 = schedule_.beta[t - 1] / std::sqrt(1.0 - ab);
    Eigen::RowVectorXd next = k1 * (a - k2 * eps);
    if (t > 1) next += schedule_.sigma[t - 1] * noise.step[t - 1];
    require_finite(next, t);
    if (trace) {
      trace->noisy[t - 1] = a;
      trace->caches[t - 1] = std::move(cache);
      trace->raw[t - 1] = std::move(raw);
    }
    a = std::move(next);
  }
  if (trace) trace->clean = a;
  return a;
}

Eigen::VectorXd DiffusionPolicy::backprop(const Trace& trace,
                                          const Eigen::RowVectorXd& upstream) const {
  const int steps = schedule_.steps();
  if (static_cast<int>(trace.caches.size()) != steps)
    throw std::invalid_argument("trace does not match the schedule");
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(denoiser_.params().size());
  Eigen::RowVectorXd g = upstream;  // d loss / d a_{t-1}
  for (int t = 1; t <= steps; ++t) {
    const double ab = schedule_.alpha_bar[t - 1];
    const double k1 = 1.0 / std::sqrt(schedule_.alpha[t - 1]);
    const double k2 = schedule_.beta[t - 1] / std::sqrt(1.0 - ab);
    double through_raw;  // d a_{t-1} / d raw
    double direct;       // d a_{t-1} / d a_t, holding raw fixed
    if (target_ == DenoiserTarget::noise) {
      through_raw = -k1 * k2;
      direct = k1;
    } else {
      through_raw = k1 * k2 * std::sqrt(ab) / std::sqrt(1.0 - ab);
      direct = k1 - k1 * k2 / std::sqrt(1.0 - ab);
    }
    NetGradients net = denoiser_.backward(trace.caches[t - 1], through_raw * g);
    grads += net.params;
    g = direct * g + net.inputs.row(0);
  }
  return grads;
}

double sample_action(const DiffusionPolicy& policy, const Eigen::VectorXd& features,
                     Rng& rng) {
  if (features.size() != policy.feature_width())
    throw std::invalid_argument(fmt::format("expected {} features, got {}",
                                            policy.feature_width(), features.size()));
  ChainNoise noise = draw_chain_noise(policy.schedule().steps(), 1, rng);
  Eigen::RowVectorXd a0 = policy.generate(features, noise);
  return policy.squash(a0[0]);
}

Critic::Critic(int feature_width, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> widths{feature_width + 1};
  std::vector<Activation> activations;
  for (int h : hidden) {
    widths.push_back(h);
    activations.push_back(Activation::tanh);
  }
  widths.push_back(1);
  activations.push_back(Activation::identity);
  net_ = DenseNet(std::move(widths), std::move(activations), rng);
}

Critic::Critic(DenseNet net) : net_(std::move(net)) {
  if (net_.output_width() != 1)
    throw std::invalid_argument("critic must have a single output");
}

Eigen::MatrixXd Critic::input(const Eigen::MatrixXd& features,
                              const Eigen::RowVectorXd& actions) const {
  if (features.rows() != feature_width() || features.cols() != actions.cols())
    throw std::invalid_argument("critic features and actions disagree in shape");
  Eigen::MatrixXd x(features.rows() + 1, features.cols());
  x.topRows(features.rows()) = features;
  x.row(features.rows()) = actions;
  return x;
}

Eigen::RowVectorXd Critic::evaluate(const Eigen::MatrixXd& features,
                                    const Eigen::RowVectorXd& actions,
                                    ForwardCache* cache) const {
  return net_.forward(input(features, actions), cache);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
}

void ReplayBuffer::push(Transition transition) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(transition));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count,
                                                      Rng& rng) const {
  if (records_.empty()) throw std::logic_error("sampling from an empty buffer");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = rng.index(records_.size());
  return idx;
}

double exploration_scale(const GdmConfig& config, int epoch) {
  double span = config.explore_anneal_fraction * config.epochs;
  double progress = span > 0.0 ? std::min(1.0, (epoch - 1) / span) : 1.0;
  return config.explore_start + (config.explore_end - config.explore_start) * progress;
}

std::pair<double, Eigen::VectorXd> actor_loss_and_gradient(
    const DiffusionPolicy& policy, const Critic& critic,
    const Eigen::MatrixXd& features, const ChainNoise& noise) {
  DiffusionPolicy::Trace trace;
  Eigen::RowVectorXd a0 = policy.generate(features, noise, &trace);
  Eigen::RowVectorXd action = a0.cwiseMax(-1.0).cwiseMin(1.0);
  ForwardCache cache;
  Eigen::RowVectorXd q = critic.evaluate(features, action, &cache);
  const double batch = static_cast<double>(q.size());
  double loss = -q.mean();

  Eigen::RowVectorXd upstream = Eigen::RowVectorXd::Constant(q.size(), -1.0 / batch);
  NetGradients cg = critic.net().backward(cache, upstream);
  Eigen::RowVectorXd d_action = cg.inputs.row(critic.feature_width());
  // Descent moves a_0 by -d_action.
  for (Eigen::Index i = 0; i < a0.size(); ++i) {
    if (a0[i] < -1.0 && d_action[i] > 0.0) d_action[i] = 0.0;
    if (a0[i] > 1.0 && d_action[i] < 0.0) d_action[i] = 0.0;
  }
  return {loss, policy.backprop(trace, d_action)};
}

GdmTrainer::GdmTrainer(DiffusionPolicy& policy, Critic& critic, Environment& env,
                       const GdmConfig& config, Rng& rng)
    : policy_(policy),
      critic_(critic),
      env_(env),
      config_(config),
      rng_(rng),
      buffer_(config.buffer_capacity),
      actor_opt_(policy.denoiser().param_count(),
                 AdamConfig{.learning_rate = config.actor_lr,
                            .max_grad_norm = config.max_grad_norm}),
      critic_opt_(critic.net().param_count(),
                  AdamConfig{.learning_rate = config.critic_lr,
                             .max_grad_norm = config.max_grad_norm}) {
  if (config_.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config_.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config_.updates_per_epoch < 0 || config_.critic_updates_per_epoch < 0)
    throw std::invalid_argument("updates per epoch must be >= 0");
  if (policy_.feature_width() != env_.feature_width() ||
      critic_.feature_width() != env_.feature_width())
    throw std::invalid_argument("policy, critic and environment disagree on features");
}

EpochRecord GdmTrainer::collect(int epoch) {
  const Scenario& scenario = env_.scenario();
  Eigen::VectorXd features = state_features(env_.observe(rng_), scenario);
  ChainNoise noise = draw_chain_noise(policy_.schedule().steps(), 1, rng_);
  double a0 = policy_.generate(features, noise)[0];
  double action = std::clamp(
      std::clamp(a0, -1.0, 1.0) + exploration_scale(config_, epoch) * rng_.normal(),
      -1.0, 1.0);
  double price = policy_.squash(action);
  StepResult result = env_.act(price);

  Transition transition;
  transition.features = std::move(features);
  transition.action = action;
  transition.reward = result.reward;
  transition.next_features = state_features(result.next, scenario);
  transition.terminal = env_.episode_done();
  buffer_.push(std::move(transition));

  return EpochRecord{epoch, price, result.server_utility, result.reward, 0.0};
}

Eigen::MatrixXd GdmTrainer::gather_features(const std::vector<std::size_t>& idx,
                                            bool next) const {
  Eigen::MatrixXd features(env_.feature_width(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    features.col(static_cast<Eigen::Index>(j)) =
        next ? buffer_[idx[j]].next_features : buffer_[idx[j]].features;
  return features;
}

double GdmTrainer::update_critic() {
  auto idx = buffer_.sample_indices(static_cast<std::size_t>(config_.batch_size), rng_);
  const auto batch = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd features = gather_features(idx, false);
  Eigen::RowVectorXd actions(batch);
  Eigen::RowVectorXd targets(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    actions[j] = buffer_[idx[j]].action;
    targets[j] = buffer_[idx[j]].reward;
  }
  if (env_.horizon() > 1) {
    Eigen::MatrixXd next = gather_features(idx, true);
    ChainNoise noise = draw_chain_noise(policy_.schedule().steps(), batch, rng_);
    Eigen::RowVectorXd next_actions =
        policy_.generate(next, noise).cwiseMax(-1.0).cwiseMin(1.0);
    Eigen::RowVectorXd bootstrap = critic_.evaluate(next, next_actions);
    for (Eigen::Index j = 0; j < batch; ++j)
      if (!buffer_[idx[j]].terminal) targets[j] += config_.discount * bootstrap[j];
  }

  ForwardCache cache;
  Eigen::RowVectorXd q = critic_.evaluate(features, actions, &cache);
  Eigen::RowVectorXd diff = q - targets;
  double loss = diff.squaredNorm() / static_cast<double>(batch);
  if (!std::isfinite(loss))
    throw TrainingDiverged("critic loss became non-finite");
  NetGradients grads =
      critic_.net().backward(cache, (2.0 / static_cast<double>(batch)) * diff);
  critic_opt_.step(critic_.net().params(), grads.params);
  return loss;
}

double GdmTrainer::update_actor() {
  auto idx = buffer_.sample_indices(static_cast<std::size_t>(config_.batch_size), rng_);
  Eigen::MatrixXd features = gather_features(idx, false);
  ChainNoise noise = draw_chain_noise(policy_.schedule().steps(),
                                      static_cast<Eigen::Index>(idx.size()), rng_);
  auto [loss, grads] = actor_loss_and_gradient(policy_, critic_, features, noise);
  if (!std::isfinite(loss) || !grads.allFinite())
    throw TrainingDiverged("actor loss or gradient became non-finite");
  actor_opt_.step(policy_.denoiser().params(), grads);
  return -loss;
}

TrainingLog GdmTrainer::run() {
  TrainingLog log;
  log.reserve(static_cast<std::size_t>(config_.epochs));
  const std::size_t warmup = static_cast<std::size_t>(std::max(config_.warmup, 1));
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    try {
      EpochRecord record = collect(epoch);
      if (buffer_.size() >= warmup) {
        // The critic takes several steps per actor step so the actor follows a
        // fitted landscape rather than the critic's initial guess.
        for (int k = 0; k < config_.critic_updates_per_epoch; ++k)
          record.loss = update_critic();
        for (int k = 0; k < config_.updates_per_epoch; ++k) update_actor();
      }
      log.push_back(record);
    } catch (const std::domain_error& e) {
      throw TrainingDiverged(fmt::format("gdm diverged at epoch {}: {}", epoch, e.what()));
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged(fmt::format("gdm diverged at epoch {}: {}", epoch, e.what()));
    }
  }
  return log;
}

}  // namespace gdmstack
