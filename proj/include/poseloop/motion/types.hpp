#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "poseloop/motion/geometry.hpp"
#include "poseloop/motion/skeleton.hpp"

namespace poseloop::motion {

// Pipeline stage a 3D sequence came from.
enum class StageTag {
  raw_estimate,   // straight out of the estimator
  imitated,       // first imitation pass
  hallucinated,   // generated by the hallucinator
  refined,        // imitation pass over hallucinated motion
  ground_truth,
};

std::string stage_tag_name(StageTag tag);
StageTag stage_tag_from_name(const std::string& name);

// T x J x 3 world- or camera-frame joint positions at a fixed frame rate.
struct MotionSequence3D {
  // frame t is a J x 3 matrix (rows joints, cols xyz).
  std::vector<Eigen::MatrixXd> frames;
  double fps = 30.0;
  StageTag stage = StageTag::ground_truth;

  int length() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
  Vec3 joint(int t, int j) const { return frames[t].row(j).transpose(); }
  bool all_finite() const;
};

// T x J x 2 image-normalized keypoints (principal point at origin).
struct Pose2DSequence {
  std::vector<Eigen::MatrixXd> frames;  // J x 2 per frame
  double fps = 30.0;

  int length() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
  bool all_finite() const;
};

// One frame of generalized coordinates.
struct ReducedFrame {
  Vec3 root_pos = Vec3::Zero();
  Quat root_rot = Quat::Identity();
  Eigen::VectorXd angles;  // length = skeleton non_root_dof()
};

// Generalized-coordinate motion: root pose + joint angles per frame.
struct ReducedPoseSequence {
  std::vector<ReducedFrame> frames;
  double fps = 30.0;

  int length() const { return static_cast<int>(frames.size()); }
};

// Generalized velocities matching a ReducedPoseSequence. Root linear velocity
// is world-frame; root angular velocity is world-frame; ball-joint rates are
// local angular velocities; hinge rates are scalar.
struct ReducedVelocity {
  Vec3 root_lin = Vec3::Zero();
  Vec3 root_ang = Vec3::Zero();
  Eigen::VectorXd angle_rates;
};

using ReducedVelocitySequence = std::vector<ReducedVelocity>;

}  // namespace poseloop::motion
