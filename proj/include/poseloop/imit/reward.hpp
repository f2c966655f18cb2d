#pragma once

#include <vector>

#include "poseloop/motion/kinematics.hpp"

namespace poseloop::imit {

using motion::FrameState;
using motion::Quat;
using motion::ReducedPoseSequence;
using motion::SkeletonSpec;
using motion::Vec3;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Exponential-kernel imitation reward: r = sum_i w_i*exp(-k_i*d_i) plus the
// residual-wrench regulation term. Weights sum to 1 including w_eta.
struct RewardConfig {
  double w_pose = 0.30;
  double w_vel = 0.05;
  double w_root_h = 0.10;
  double w_root_v = 0.10;
  double w_ee_pos = 0.20;
  double w_ee_vel = 0.05;
  double w_feet = 0.10;
  double w_eta = 0.10;

  double k_pose = 2.0;
  double k_vel = 0.005;
  double k_root_h = 10.0;
  double k_root_v = 0.5;
  double k_ee_pos = 10.0;
  double k_ee_vel = 0.05;
  double k_feet = 10.0;
  double k_eta = 1e-4;
};

// Throws ConfigError unless weights are >= 0 and sum to 1, and scales are > 0.
void validate_reward_config(const RewardConfig& config);

// The seven per-frame characteristics, all heading-local.
struct MotionCharacteristics {
  Quat root_tilt = Quat::Identity();  // heading-removed root orientation
  Eigen::VectorXd angles;             // joint chart angles
  Eigen::VectorXd velocity;           // [root angular velocity; dof rates]
  double root_height = 0.0;
  Vec3 root_lin_vel = Vec3::Zero();
  Eigen::VectorXd ee_pos;  // {feet, hands, head} root-relative positions
  Eigen::VectorXd ee_vel;  // their world velocities, heading-rotated
  Vec3 feet_rel = Vec3::Zero();  // left-foot -> right-foot vector
};

MotionCharacteristics compute_characteristics(const SkeletonSpec& skel,
                                              const FrameState& state);

// Characteristics per frame with finite-difference velocities.
std::vector<MotionCharacteristics> sequence_characteristics(
    const SkeletonSpec& skel, const ReducedPoseSequence& reduced);

struct RewardBreakdown {
  double pose = 0.0;
  double vel = 0.0;
  double root_h = 0.0;
  double root_v = 0.0;
  double ee_pos = 0.0;
  double ee_vel = 0.0;
  double feet = 0.0;
  double eta = 0.0;
  double total = 0.0;
};

// Pose distance uses the quaternion geodesic per ball joint and the absolute
// angle difference per hinge; the remaining terms are plain L2 distances.
// eta = [force; torque]. The breakdown terms sum to total exactly.
RewardBreakdown compute_reward(const SkeletonSpec& skel, const RewardConfig& config,
                               const MotionCharacteristics& sim,
                               const MotionCharacteristics& ref, const Vec6& eta);

}  // namespace poseloop::imit
