#pragma once

#include <Eigen/Dense>

#include "poseloop/common/rng.hpp"
#include "poseloop/neural/adam.hpp"
#include "poseloop/neural/param.hpp"
#include "poseloop/rl/policy.hpp"

namespace poseloop::rl {

// Flat on-policy transitions; columns of obs/actions are samples.
struct TransitionBatch {
  Mat obs;                    // obs_dim x N
  Mat actions;                // act_dim x N
  Eigen::VectorXd logp_old;   // N
  Eigen::VectorXd advantages; // N
  Eigen::VectorXd returns;    // N

  int size() const { return static_cast<int>(logp_old.size()); }
};

struct PpoConfig {
  double gamma = 0.95;
  double lam = 0.95;
  double clip = 0.2;
  double lr = 5e-5;
  double value_lr = 1e-3;
  int epochs = 10;
  int minibatch = 256;
  int rollout_batch = 4096;   // transitions collected per update
  double entropy_coef = 0.0;
  double max_grad_norm = 5.0;
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// One PPO update over the batch: epochs x shuffled minibatches, value step
// then policy step per minibatch. Advantages are normalized over the full
// batch, skipped entirely when their std < 1e-8. log-std is clamped to
// [-5, 2] after each policy step. Throws DataError on an empty batch.
PpoStats ppo_update(PolicyNet& policy, GaussianHead& head, neural::ParamStore& policy_store,
                    neural::Adam& policy_opt, ValueNet& value,
                    neural::ParamStore& value_store, neural::Adam& value_opt,
                    const TransitionBatch& batch, const PpoConfig& config, Rng& rng);

}  // namespace poseloop::rl
