#pragma once

#include <cmath>

#include "poseloop/rl/gae.hpp"
#include "poseloop/rl/ppo.hpp"

namespace poseloop::testsupport {

// 1-state 2-action bandit: the continuous action's sign picks the arm.
// a > 0 pays 1, a <= 0 pays 0, so with a Gaussian policy the probability of
// the better arm is Phi(mu / sigma) in closed form.
struct BanditResult {
  double p_better = 0.0;     // after the final update
  double p_initial = 0.0;
};

inline BanditResult run_bandit(std::uint64_t seed, int updates, double policy_lr = 0.01,
                               double value_lr = 0.05) {
  using namespace poseloop::rl;
  namespace nn = poseloop::neural;

  nn::ParamStore pstore, vstore;
  Rng init_rng(derive_seed(seed, "bandit.init"));
  MlpPolicy policy(pstore, "pi", 1, 16, 1, init_rng);
  GaussianHead head = GaussianHead::create(pstore, "pi.log_std", 1);
  MlpValue value(vstore, "v", 1, 16, init_rng);
  nn::Adam popt(pstore, policy_lr);
  nn::Adam vopt(vstore, value_lr);

  PpoConfig cfg;
  cfg.lr = policy_lr;
  cfg.value_lr = value_lr;
  cfg.epochs = 4;
  cfg.minibatch = 64;
  cfg.rollout_batch = 256;

  Mat one = Mat::Ones(1, 1);
  auto p_better = [&]() {
    const double mu = policy.infer(one)(0, 0);
    const double sig = head.sigma()(0);
    return 0.5 * std::erfc(-mu / (sig * std::sqrt(2.0)));
  };

  BanditResult result;
  result.p_initial = p_better();

  Rng rng(derive_seed(seed, "bandit.run"));
  for (int u = 0; u < updates; ++u) {
    const int n = cfg.rollout_batch;
    TransitionBatch batch;
    batch.obs = Mat::Ones(1, n);
    batch.actions.resize(1, n);
    batch.logp_old.resize(n);
    Eigen::VectorXd rewards(n);
    std::vector<EpisodeSlice> episodes(n);
    const Eigen::VectorXd mu = policy.infer(batch.obs).row(0);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd a = head.sample(mu.segment(i, 1), rng);
      batch.actions(0, i) = a[0];
      batch.logp_old[i] = head.log_prob(mu.segment(i, 1), a);
      rewards[i] = a[0] > 0 ? 1.0 : 0.0;
      episodes[i] = {i, 1};
    }
    const Eigen::VectorXd values = value.infer(batch.obs);
    gae_advantages(rewards, values, episodes, cfg.gamma, cfg.lam, batch.advantages,
                   batch.returns);
    ppo_update(policy, head, pstore, popt, value, vstore, vopt, batch, cfg, rng);
  }

  result.p_better = p_better();
  return result;
}

}  // namespace poseloop::testsupport
