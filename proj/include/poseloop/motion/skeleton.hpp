#pragma once

#include <string>
#include <vector>

#include "poseloop/motion/geometry.hpp"

namespace poseloop::motion {

enum class DofKind { hinge, ball };

struct AngleLimits {
  double lo = -3.141592653589793;
  double hi = 3.141592653589793;
};

struct JointSpec {
  std::string name;
  int parent = -1;                  // -1 for the root
  Vec3 offset = Vec3::Zero();      // bone offset in the parent frame (m)
  DofKind dof = DofKind::ball;
  Vec3 axis = Vec3::UnitY();       // hinge only, unit vector in joint frame
  AngleLimits limits;
  double kp = 0.0;                  // PD gains, N*m/rad and N*m*s/rad
  double kd = 0.0;
  double link_mass = 0.0;           // kg
  Mat3 link_inertia = Mat3::Identity();  // about the link COM, link frame
  Vec3 com_offset = Vec3::Zero();  // link COM in the joint frame
};

// Kinematic tree plus dynamic parameters. Immutable once built.
struct SkeletonSpec {
  std::vector<JointSpec> joints;
  int root_index = 0;
  double total_mass = 0.0;  // kg
  double fps_default = 30.0;

  int joint_count() const { return static_cast<int>(joints.size()); }

  int dof_of(int j) const {
    if (j == root_index) return 6;
    return joints[j].dof == DofKind::ball ? 3 : 1;
  }

  // Angle-vector length over non-root joints (root pose stored separately).
  int non_root_dof() const {
    int n = 0;
    for (int j = 0; j < joint_count(); ++j)
      if (j != root_index) n += dof_of(j);
    return n;
  }

  // Offset of joint j's angles inside the non-root angle vector (-1 for root).
  int angle_offset(int j) const {
    if (j == root_index) return -1;
    int off = 0;
    for (int i = 0; i < j; ++i)
      if (i != root_index) off += dof_of(i);
    return off;
  }

  int find_joint(const std::string& name) const {
    for (int j = 0; j < joint_count(); ++j)
      if (joints[j].name == name) return j;
    return -1;
  }

  std::vector<int> children_of(int j) const {
    std::vector<int> out;
    for (int i = 0; i < joint_count(); ++i)
      if (i != root_index && joints[i].parent == j) out.push_back(i);
    return out;
  }
};

struct SkeletonViolation {
  std::string what;
};

struct SkeletonReport {
  std::vector<SkeletonViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Checks every SkeletonSpec invariant; never throws.
SkeletonReport validate_skeleton(const SkeletonSpec& skel);

// The default 16-joint humanoid. Rest pose is a T-pose: +z up, +x forward,
// arms along +/-y, ankles ~7 cm above the ground plane z=0.
SkeletonSpec default_humanoid(double total_mass = 70.0, double fps = 30.0);

// Canonical joint indices of the default humanoid.
namespace humanoid {
constexpr int pelvis = 0;
constexpr int spine = 1;
constexpr int neck = 2;
constexpr int head = 3;
constexpr int l_hip = 4;
constexpr int l_knee = 5;
constexpr int l_ankle = 6;
constexpr int r_hip = 7;
constexpr int r_knee = 8;
constexpr int r_ankle = 9;
constexpr int l_shoulder = 10;
constexpr int l_elbow = 11;
constexpr int l_wrist = 12;
constexpr int r_shoulder = 13;
constexpr int r_elbow = 14;
constexpr int r_wrist = 15;
constexpr int count = 16;
}  // namespace humanoid

// Feet and end-effector sets used by rewards and metrics.
std::vector<int> foot_joints(const SkeletonSpec& skel);
std::vector<int> end_effector_joints(const SkeletonSpec& skel);  // feet, hands, head
int head_joint(const SkeletonSpec& skel);

// Stable content checksum over the full skeleton definition (crc32 of a
// canonical serialization); identifies the rig in motion-file headers.
std::uint32_t skeleton_checksum(const SkeletonSpec& skel);

}  // namespace poseloop::motion
