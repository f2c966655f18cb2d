#pragma once

#include <Eigen/Dense>
#include <vector>

namespace poseloop::rl {

// Contiguous episode inside flat transition arrays.
struct EpisodeSlice {
  int start = 0;
  int length = 0;
};

// GAE(gamma, lambda) per episode. Every episode is treated as ending in a
// terminal state (bootstrap value 0), which matches clip-end and head-fall
// terminations. returns[t] = advantages[t] + values[t].
void gae_advantages(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                    const std::vector<EpisodeSlice>& episodes, double gamma, double lam,
                    Eigen::VectorXd& advantages, Eigen::VectorXd& returns);

}  // namespace poseloop::rl
