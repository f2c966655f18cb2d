#pragma once

#include "poseloop/motion/types.hpp"

namespace poseloop::motion {

// World transform of every joint for one reduced frame.
struct FrameTransforms {
  std::vector<Vec3> position;
  std::vector<Quat> rotation;
};

FrameTransforms frame_transforms(const SkeletonSpec& skel, const ReducedFrame& frame);

// Joint world positions for every frame. Root position of the output equals
// the reduced root position exactly.
MotionSequence3D forward_kinematics(const SkeletonSpec& skel,
                                    const ReducedPoseSequence& reduced);

Eigen::MatrixXd forward_kinematics_frame(const SkeletonSpec& skel,
                                         const ReducedFrame& frame);

struct IkOptions {
  double bone_length_tolerance = 0.20;  // relative
  double lambda = 0.01;                 // damped-least-squares damping
  int max_iterations = 20;
  double target_residual = 1e-4;        // m, early-out threshold
};

struct IkResult {
  ReducedPoseSequence reduced;
  // Max per-joint position residual of FK(result) vs the input, per frame (m).
  std::vector<double> frame_residual;
  double max_residual = 0.0;
  bool unreachable_flag = false;  // best-fit exceeded the contract threshold
};

// Analytic swing + hinge initialization followed by damped-least-squares
// refinement. Throws DataError when the input's bone lengths deviate from the
// skeleton by more than the tolerance.
IkResult inverse_kinematics(const SkeletonSpec& skel, const MotionSequence3D& motion,
                            const IkOptions& opts = {});

// Central differences interior, one-sided at the ends; ball-joint angular
// velocity via the quaternion log map. Throws DataError when T < 2.
ReducedVelocitySequence finite_difference_velocities(const SkeletonSpec& skel,
                                                     const ReducedPoseSequence& reduced);

// Heading yaw of the left-hip -> right-hip axis projected to the ground.
double heading_yaw(const SkeletonSpec& skel, const Quat& root_rot);

struct FrameState {
  ReducedFrame pose;
  ReducedVelocity velocity;
};

// Removes root yaw and root horizontal position; keeps root height. Rotates
// velocities into the heading-local frame.
FrameState to_heading_local(const SkeletonSpec& skel, const FrameState& state);

// World linear velocity of every joint origin for one state.
std::vector<Vec3> joint_velocities(const SkeletonSpec& skel, const FrameState& state);

// T-pose reduced frame: zero angles, identity root at the rest root height.
ReducedFrame rest_frame(const SkeletonSpec& skel);

// Rest (T-pose) world position of each joint with the root at its rest pose.
std::vector<Vec3> rest_positions(const SkeletonSpec& skel);

// Bone length between joint j and its parent, from the skeleton offsets.
double bone_length(const SkeletonSpec& skel, int j);

}  // namespace poseloop::motion
