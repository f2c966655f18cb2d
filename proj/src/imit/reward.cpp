#include "poseloop/imit/reward.hpp"

#include <cmath>

#include "poseloop/common/error.hpp"

namespace poseloop::imit {

using motion::DofKind;
using motion::quat_angle;
using motion::quat_exp;
using motion::yaw_quat;

void validate_reward_config(const RewardConfig& c) {
  const double weights[] = {c.w_pose, c.w_vel,    c.w_root_h, c.w_root_v,
                            c.w_ee_pos, c.w_ee_vel, c.w_feet,   c.w_eta};
  const double scales[] = {c.k_pose, c.k_vel,    c.k_root_h, c.k_root_v,
                           c.k_ee_pos, c.k_ee_vel, c.k_feet,   c.k_eta};
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("reward weight negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("reward weights must sum to 1");
  for (double k : scales) {
    if (k <= 0.0) throw ConfigError("reward scale must be positive");
  }
}

MotionCharacteristics compute_characteristics(const SkeletonSpec& skel,
                                              const FrameState& state) {
  MotionCharacteristics out;
  const double yaw = motion::heading_yaw(skel, state.pose.root_rot);
  const Quat unyaw = yaw_quat(yaw).conjugate();

  out.root_tilt = unyaw * state.pose.root_rot;
  if (out.root_tilt.w() < 0.0) out.root_tilt.coeffs() = -out.root_tilt.coeffs();
  out.angles = state.pose.angles;

  out.velocity.resize(3 + state.velocity.angle_rates.size());
  out.velocity.head<3>() = unyaw * state.velocity.root_ang;
  out.velocity.tail(state.velocity.angle_rates.size()) = state.velocity.angle_rates;

  out.root_height = state.pose.root_pos.z();
  out.root_lin_vel = unyaw * state.velocity.root_lin;

  const motion::FrameTransforms ft = motion::frame_transforms(skel, state.pose);
  const std::vector<Vec3> jv = motion::joint_velocities(skel, state);

  const std::vector<int> ee = motion::end_effector_joints(skel);
  out.ee_pos.resize(3 * ee.size());
  out.ee_vel.resize(3 * ee.size());
  for (std::size_t i = 0; i < ee.size(); ++i) {
    out.ee_pos.segment<3>(3 * i) = unyaw * (ft.position[ee[i]] - state.pose.root_pos);
    out.ee_vel.segment<3>(3 * i) = unyaw * jv[ee[i]];
  }

  const std::vector<int> feet = motion::foot_joints(skel);
  if (feet.size() == 2) {
    out.feet_rel = unyaw * (ft.position[feet[1]] - ft.position[feet[0]]);
  }
  return out;
}

std::vector<MotionCharacteristics> sequence_characteristics(
    const SkeletonSpec& skel, const ReducedPoseSequence& reduced) {
  const motion::ReducedVelocitySequence vels =
      motion::finite_difference_velocities(skel, reduced);
  std::vector<MotionCharacteristics> out(reduced.length());
  for (int t = 0; t < reduced.length(); ++t) {
    out[t] = compute_characteristics(skel, {reduced.frames[t], vels[t]});
  }
  return out;
}

namespace {

double pose_distance(const SkeletonSpec& skel, const MotionCharacteristics& a,
                     const MotionCharacteristics& b) {
  if (a.angles.size() != b.angles.size()) {
    throw DataError("compute_reward: characteristic layouts disagree");
  }
  double sq = std::pow(quat_angle(a.root_tilt, b.root_tilt), 2);
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    const int off = skel.angle_offset(j);
    if (skel.joints[j].dof == DofKind::ball) {
      const Quat qa = quat_exp(a.angles.segment<3>(off));
      const Quat qb = quat_exp(b.angles.segment<3>(off));
      sq += std::pow(quat_angle(qa, qb), 2);
    } else {
      sq += std::pow(a.angles[off] - b.angles[off], 2);
    }
  }
  return std::sqrt(sq);
}

}  // namespace

RewardBreakdown compute_reward(const SkeletonSpec& skel, const RewardConfig& config,
                               const MotionCharacteristics& sim,
                               const MotionCharacteristics& ref, const Vec6& eta) {
  if (sim.velocity.size() != ref.velocity.size() || sim.ee_pos.size() != ref.ee_pos.size()) {
    throw DataError("compute_reward: characteristic layouts disagree");
  }
  RewardBreakdown b;
  b.pose = config.w_pose * std::exp(-config.k_pose * pose_distance(skel, sim, ref));
  b.vel = config.w_vel * std::exp(-config.k_vel * (sim.velocity - ref.velocity).norm());
  b.root_h =
      config.w_root_h * std::exp(-config.k_root_h * std::abs(sim.root_height - ref.root_height));
  b.root_v =
      config.w_root_v * std::exp(-config.k_root_v * (sim.root_lin_vel - ref.root_lin_vel).norm());
  b.ee_pos = config.w_ee_pos * std::exp(-config.k_ee_pos * (sim.ee_pos - ref.ee_pos).norm());
  b.ee_vel = config.w_ee_vel * std::exp(-config.k_ee_vel * (sim.ee_vel - ref.ee_vel).norm());
  b.feet = config.w_feet * std::exp(-config.k_feet * (sim.feet_rel - ref.feet_rel).norm());
  b.eta = config.w_eta * std::exp(-config.k_eta * eta.norm());
  b.total = b.pose + b.vel + b.root_h + b.root_v + b.ee_pos + b.ee_vel + b.feet + b.eta;
  return b;
}

}  // namespace poseloop::imit
