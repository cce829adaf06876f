#include "gdmstack/gradcheck.hpp"

#include "gdmstack/baselines.hpp"
#include "gdmstack/diffusion.hpp"

namespace gdmstack {

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

// Checks d/dparams of sum(weights .* net(inputs)).
GradCheckEntry check_net(const std::string& name, const DenseNet& net, Rng& rng) {
  const Eigen::Index batch = 4;
  Eigen::MatrixXd inputs = random_matrix(net.input_width(), batch, rng);
  Eigen::MatrixXd weights = random_matrix(net.output_width(), batch, rng);
  ForwardCache cache;
  net.forward(inputs, &cache);
  Eigen::VectorXd analytic = net.backward(cache, weights).params;
  DenseNet probe = net;
  auto loss = [&](const Eigen::VectorXd& params) {
    probe.params() = params;
    return (weights.array() * probe.forward(inputs).array()).sum();
  };
  GradCheckResult r =
      finite_difference_check(loss, net.params(), analytic, kGradCheckStep);
  return {name, r.max_relative_error, kNetGradTolerance, r.checked};
}

}  // namespace

std::vector<GradCheckEntry> run_gradient_checks(const ExperimentConfig& config,
                                                std::uint64_t seed) {
  Rng rng(seed);
  const int features = config.ranges.market.n_devices + 1;
  const double pmin = config.ranges.market.price_min;
  const double pmax = config.ranges.market.price_max;
  std::vector<GradCheckEntry> entries;

  DiffusionPolicy policy =
      DiffusionPolicy::create(config.gdm.policy, features, pmin, pmax, rng);
  entries.push_back(check_net("denoiser", policy.denoiser(), rng));

  Critic critic(features, config.gdm.critic_hidden, rng);
  entries.push_back(check_net("critic", critic.net(), rng));

  GaussianPolicy gaussian(features, config.ppo.hidden, config.ppo.initial_std, pmin,
                          pmax, rng);
  entries.push_back(check_net("ppo_mean", gaussian.mean_net(), rng));
  DenseNet value = make_value_net(features, config.ppo.hidden, rng);
  entries.push_back(check_net("ppo_value", value, rng));

  {
    // Surrogate at a perturbed policy so ratios differ from 1 but stay
    // inside the clip band.
    const Eigen::Index batch = 8;
    RolloutBatch rollout;
    rollout.features = random_matrix(features, batch, rng);
    Eigen::RowVectorXd mu = gaussian.mean(rollout.features);
    rollout.actions.resize(batch);
    rollout.old_log_probs.resize(batch);
    rollout.advantages.resize(batch);
    rollout.rewards = Eigen::RowVectorXd::Zero(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
      rollout.actions[i] = mu[i] + gaussian.std() * rng.normal();
      rollout.old_log_probs[i] =
          gaussian_log_prob(rollout.actions[i], mu[i], gaussian.std()) +
          rng.uniform(-0.05, 0.05);
      rollout.advantages[i] = rng.uniform(-1.0, 1.0);
    }
    auto [loss0, analytic] = ppo_policy_loss_and_gradient(
        gaussian, rollout, config.ppo.clip, config.ppo.entropy_coef);
    (void)loss0;
    Eigen::VectorXd point(analytic.size());
    point.head(analytic.size() - 1) = gaussian.mean_net().params();
    point[analytic.size() - 1] = gaussian.log_std();
    GaussianPolicy probe = gaussian;
    auto loss = [&](const Eigen::VectorXd& p) {
      probe.mean_net().params() = p.head(p.size() - 1);
      probe.set_log_std(p[p.size() - 1]);
      return ppo_policy_loss_and_gradient(probe, rollout, config.ppo.clip,
                                          config.ppo.entropy_coef)
          .first;
    };
    GradCheckResult r = finite_difference_check(loss, point, analytic, kGradCheckStep);
    entries.push_back({"ppo_surrogate", r.max_relative_error, kNetGradTolerance, r.checked});
  }

  {
    // Tiny policy, full reverse chain, actor loss -mean Q.
    DiffusionPolicyConfig tiny = config.gdm.policy;
    tiny.hidden = {6};
    const int tiny_features = 3;
    DiffusionPolicy small = DiffusionPolicy::create(tiny, tiny_features, pmin, pmax, rng);
    Critic small_critic(tiny_features, {5}, rng);
    const Eigen::Index batch = 3;
    Eigen::MatrixXd state = random_matrix(tiny_features, batch, rng);
    ChainNoise noise = draw_chain_noise(small.schedule().steps(), batch, rng);
    auto [loss0, analytic] = actor_loss_and_gradient(small, small_critic, state, noise);
    (void)loss0;
    DiffusionPolicy probe = small;
    auto loss = [&](const Eigen::VectorXd& p) {
      probe.denoiser().params() = p;
      return actor_loss_and_gradient(probe, small_critic, state, noise).first;
    };
    GradCheckResult r =
        finite_difference_check(loss, small.denoiser().params(), analytic, kGradCheckStep);
    entries.push_back(
        {"actor_chain", r.max_relative_error, kChainGradTolerance, r.checked});
  }
  return entries;
}

}  // namespace gdmstack
