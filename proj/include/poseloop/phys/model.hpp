#pragma once

#include <vector>

#include "poseloop/motion/kinematics.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/phys/spatial.hpp"

namespace poseloop::phys {

using motion::ReducedFrame;
using motion::SkeletonSpec;

// Static per-link dynamics quantities derived from a SkeletonSpec.
struct LinkModel {
  int parent = -1;
  int nd = 0;      // joint dofs: root 6, ball 3, hinge 1
  int voff = 0;    // offset into the generalized velocity vector
  Eigen::Matrix<double, 6, 6> s;  // motion subspace in the first nd columns
  Mat66 inertia;   // spatial inertia about the joint origin, body coords
  Vec3 offset;     // joint position in the parent frame
};

struct PhysModel {
  const SkeletonSpec* skel = nullptr;
  std::vector<LinkModel> links;
  std::vector<int> order;  // topological, root first
  int root = 0;
  int nv = 0;  // generalized velocity dimension: 6 + non-root dof

  static PhysModel build(const SkeletonSpec& skel);
};

// Per-substep kinematics of one link.
struct LinkKin {
  Mat3 rot_world;   // body frame orientation in world coords
  Vec3 pos_world;   // joint origin in world coords
  Xform to_body;    // transform from the parent body frame (world for root)
  Vec6 v;           // body-frame spatial velocity
};

// Generalized velocity layout: [root w_body(3), root v_body(3), joint rates].
// With root_fixed the root entries are ignored and treated as zero.
void compute_link_kinematics(const PhysModel& model, const ReducedFrame& pose,
                             const Eigen::VectorXd& vel, bool root_fixed,
                             std::vector<LinkKin>& out);

// World linear momentum of the whole mechanism.
Vec3 linear_momentum(const PhysModel& model, const std::vector<LinkKin>& kin);

double kinetic_energy(const PhysModel& model, const std::vector<LinkKin>& kin);

}  // namespace poseloop::phys
