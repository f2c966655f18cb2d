#include "poseloop/rl/gae.hpp"

#include "poseloop/common/error.hpp"

namespace poseloop::rl {

void gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                    const std::vector<EpisodeSlice>& episodes, double gamma, double lam,
                    Eigen::VectorXd& advantages, Eigen::VectorXd& returns) {
  if (rewards.size() != values.size()) throw DataError("gae: reward/value length mismatch");
  advantages.resize(rewards.size());
  returns.resize(rewards.size());
  for (const EpisodeSlice& ep : episodes) {
    if (ep.start < 0 || ep.length < 1 || ep.start + ep.length > rewards.size())
      throw DataError("gae: episode slice out of range");
    double acc = 0.0;
    for (int t = ep.length - 1; t >= 0; --t) {
      int i = ep.start + t;
      double v_next = (t == ep.length - 1) ? 0.0 : values[i + 1];
      double delta = rewards[i] + gamma * v_next - values[i];
      acc = delta + gamma * lam * acc;
      advantages[i] = acc;
      returns[i] = acc + values[i];
    }
  }
}

}  // namespace poseloop::rl
