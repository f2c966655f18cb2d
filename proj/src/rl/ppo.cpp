#include "poseloop/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "poseloop/common/error.hpp"

namespace poseloop::rl {

namespace {

void check_batch(const TransitionBatch& batch, int act_dim) {
  const int n = batch.size();
  if (n == 0) throw DataError("ppo_update: empty batch");
  if (batch.obs.cols() != n || batch.actions.cols() != n || batch.advantages.size() != n ||
      batch.returns.size() != n) {
    throw DataError("ppo_update: batch field sizes disagree");
  }
  if (batch.actions.rows() != act_dim) {
    throw DataError("ppo_update: action dim mismatch");
  }
}

}  // namespace

PpoStats ppo_update(PolicyNet& policy, GaussianHead& head, neural::ParamStore& policy_store,
                    neural::Adam& policy_opt, ValueNet& value,
                    neural::ParamStore& value_store, neural::Adam& value_opt,
                    const TransitionBatch& batch, const PpoConfig& config, Rng& rng) {
  const int n = batch.size();
  const int act_dim = policy.action_dim();
  check_batch(batch, act_dim);

  Eigen::VectorXd adv = batch.advantages;
  const double mean = adv.mean();
  const double std = std::sqrt((adv.array() - mean).square().mean());
  if (std >= 1e-8) adv = (adv.array() - mean) / (std + 1e-8);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  PpoStats stats;
  int passes = 0;
  const int mb = std::max(1, std::min(config.minibatch, n));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int start = 0; start < n; start += mb) {
      const int m = std::min(mb, n - start);

      Mat obs(batch.obs.rows(), m);
      Mat act(act_dim, m);
      Eigen::VectorXd a(m), lp_old(m), ret(m);
      for (int j = 0; j < m; ++j) {
        const int i = order[start + j];
        obs.col(j) = batch.obs.col(i);
        act.col(j) = batch.actions.col(i);
        a[j] = adv[i];
        lp_old[j] = batch.logp_old[i];
        ret[j] = batch.returns[i];
      }

      value_store.zero_grads();
      const Eigen::VectorXd v = value.forward(obs);
      const Eigen::VectorXd verr = v - ret;
      value.backward(2.0 * verr / m);
      if (config.max_grad_norm > 0) value_store.clip_grad_norm(config.max_grad_norm);
      value_opt.step();
      stats.value_loss += verr.squaredNorm() / m;

      policy_store.zero_grads();
      const Mat mu = policy.forward(obs);
      const Eigen::ArrayXd log_sig = head.log_std->value.col(0).array();
      const Eigen::ArrayXd inv_var = (-2.0 * log_sig).exp();

      Mat dmu(act_dim, m);
      Eigen::ArrayXd dlog_sig = Eigen::ArrayXd::Zero(act_dim);
      double surrogate = 0.0;
      for (int j = 0; j < m; ++j) {
        const Eigen::ArrayXd diff = (act.col(j) - mu.col(j)).array();
        const double logp =
            -0.5 * (diff.square() * inv_var).sum() - log_sig.sum() -
            act_dim * 0.5 * std::log(2.0 * M_PI);
        const double ratio = std::exp(std::clamp(logp - lp_old[j], -20.0, 20.0));
        const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
        surrogate += std::min(ratio * a[j], clipped * a[j]);
        stats.approx_kl += lp_old[j] - logp;
        if (std::abs(ratio - 1.0) > config.clip) stats.clip_fraction += 1.0;

        const bool active = (a[j] > 0 && ratio <= 1.0 + config.clip) ||
                            (a[j] < 0 && ratio >= 1.0 - config.clip);
        const double dlogp = active ? -a[j] * ratio / m : 0.0;
        dmu.col(j) = (dlogp * diff * inv_var).matrix();
        dlog_sig += dlogp * (diff.square() * inv_var - 1.0);
      }
      stats.policy_loss += -surrogate / m;
      stats.entropy += head.entropy();
      dlog_sig -= config.entropy_coef;  // d(-c*H)/dlog_sigma = -c per dim

      policy.backward(dmu);
      head.log_std->grad.col(0) += dlog_sig.matrix();
      if (config.max_grad_norm > 0) policy_store.clip_grad_norm(config.max_grad_norm);
      policy_opt.step();
      head.log_std->value = head.log_std->value.cwiseMax(-5.0).cwiseMin(2.0);

      ++passes;
    }
  }

  stats.policy_loss /= passes;
  stats.value_loss /= passes;
  stats.entropy /= passes;
  stats.clip_fraction /= config.epochs * n;
  stats.approx_kl /= config.epochs * n;
  return stats;
}

}  // namespace poseloop::rl
