#include "poseloop/motion/skeleton.hpp"

#include <zlib.h>

#include <cstdio>
#include <string>

namespace poseloop::motion {

namespace {

// Solid-rod inertia about the COM with the rod axis along dir.
Mat3 rod_inertia(double mass, const Vec3& dir, double length, double radius) {
  double axial = 0.5 * mass * radius * radius;
  double transverse = mass * (length * length / 12.0 + 0.25 * radius * radius);
  Vec3 d = dir.normalized();
  Mat3 outer = d * d.transpose();
  return axial * outer + transverse * (Mat3::Identity() - outer);
}

struct LinkShape {
  Vec3 axis;
  double length;
  double radius;
};

}  // namespace

SkeletonReport validate_skeleton(const SkeletonSpec& skel) {
  SkeletonReport report;
  auto fail = [&](std::string what) { report.violations.push_back({std::move(what)}); };

  int n = skel.joint_count();
  if (n == 0) {
    fail("skeleton has no joints");
    return report;
  }
  if (skel.root_index < 0 || skel.root_index >= n) {
    fail("root index out of range");
    return report;
  }
  if (skel.total_mass <= 0.0) fail("total mass must be positive");
  if (skel.fps_default <= 0.0) fail("default fps must be positive");

  double mass_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const JointSpec& spec = skel.joints[j];
    std::string tag = "joint " + spec.name + ": ";
    if (j == skel.root_index) {
      if (spec.parent != -1) fail(tag + "root parent must be -1");
    } else {
      if (spec.parent < 0 || spec.parent >= n) fail(tag + "parent out of range");
      if (spec.parent == j) fail(tag + "joint is its own parent");
    }
    if (spec.offset.norm() <= 0.0) fail(tag + "bone offset has zero length");
    if (spec.link_mass <= 0.0) fail(tag + "link mass must be positive");
    if (spec.kp < 0.0 || spec.kd < 0.0) fail(tag + "PD gains must be nonnegative");
    if (spec.limits.lo >= spec.limits.hi) fail(tag + "angle limits must satisfy lo < hi");
    if (spec.dof == DofKind::hinge && std::abs(spec.axis.norm() - 1.0) > 1e-9)
      fail(tag + "hinge axis must be unit length");
    Mat3 sym = 0.5 * (spec.link_inertia + spec.link_inertia.transpose());
    if ((sym - spec.link_inertia).norm() > 1e-9 * (1.0 + spec.link_inertia.norm()))
      fail(tag + "link inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      fail(tag + "link inertia must be positive definite");
    mass_sum += spec.link_mass;
    for (int i = 0; i < n; ++i)
      if (i != j && skel.joints[i].name == spec.name) {
        fail(tag + "duplicate joint name");
        break;
      }
  }
  if (std::abs(mass_sum - skel.total_mass) > 1e-6 * skel.total_mass)
    fail("link masses do not sum to the total mass");

  // Tree check: every joint must reach the root without revisiting a joint.
  for (int j = 0; j < n; ++j) {
    int cur = j;
    int hops = 0;
    while (cur != skel.root_index && hops <= n) {
      cur = skel.joints[cur].parent;
      if (cur < 0 || cur >= n) break;
      ++hops;
    }
    if (cur != skel.root_index)
      fail("joint " + skel.joints[j].name + ": does not chain to the root");
  }
  return report;
}

SkeletonSpec default_humanoid(double total_mass, double fps) {
  SkeletonSpec skel;
  skel.root_index = 0;
  skel.total_mass = total_mass;
  skel.fps_default = fps;
  skel.joints.resize(humanoid::count);

  auto ball = [&](int j, const char* name, int parent, Vec3 offset, double limit,
                  double kp, double kd) {
    JointSpec& s = skel.joints[j];
    s.name = name;
    s.parent = parent;
    s.offset = offset;
    s.dof = DofKind::ball;
    s.limits = {-limit, limit};
    s.kp = kp;
    s.kd = kd;
  };
  auto hinge = [&](int j, const char* name, int parent, Vec3 offset, Vec3 axis,
                   double lo, double hi, double kp, double kd) {
    JointSpec& s = skel.joints[j];
    s.name = name;
    s.parent = parent;
    s.offset = offset;
    s.dof = DofKind::hinge;
    s.axis = axis;
    s.limits = {lo, hi};
    s.kp = kp;
    s.kd = kd;
  };

  using namespace humanoid;
  // Root offset stores the rest pose's world position.
  ball(pelvis, "pelvis", -1, {0.0, 0.0, 0.95}, M_PI, 0.0, 0.0);
  ball(spine, "spine", pelvis, {0.0, 0.0, 0.22}, 0.6, 400.0, 40.0);
  ball(neck, "neck", spine, {0.0, 0.0, 0.26}, 0.8, 60.0, 6.0);
  hinge(head, "head", neck, {0.0, 0.0, 0.13}, Vec3::UnitY(), -0.8, 0.8, 40.0, 4.0);
  ball(l_hip, "l_hip", pelvis, {0.0, 0.10, -0.06}, 2.0, 300.0, 30.0);
  hinge(l_knee, "l_knee", l_hip, {0.0, 0.0, -0.42}, Vec3::UnitY(), 0.0, 2.4, 250.0, 25.0);
  hinge(l_ankle, "l_ankle", l_knee, {0.0, 0.0, -0.40}, Vec3::UnitY(), -0.7, 0.9, 100.0, 10.0);
  ball(r_hip, "r_hip", pelvis, {0.0, -0.10, -0.06}, 2.0, 300.0, 30.0);
  hinge(r_knee, "r_knee", r_hip, {0.0, 0.0, -0.42}, Vec3::UnitY(), 0.0, 2.4, 250.0, 25.0);
  hinge(r_ankle, "r_ankle", r_knee, {0.0, 0.0, -0.40}, Vec3::UnitY(), -0.7, 0.9, 100.0, 10.0);
  ball(l_shoulder, "l_shoulder", spine, {0.0, 0.19, 0.21}, 2.8, 150.0, 15.0);
  hinge(l_elbow, "l_elbow", l_shoulder, {0.0, 0.28, 0.0}, Vec3::UnitZ(), -2.4, 0.0, 100.0, 10.0);
  hinge(l_wrist, "l_wrist", l_elbow, {0.0, 0.26, 0.0}, Vec3::UnitZ(), -1.0, 1.0, 30.0, 3.0);
  ball(r_shoulder, "r_shoulder", spine, {0.0, -0.19, 0.21}, 2.8, 150.0, 15.0);
  hinge(r_elbow, "r_elbow", r_shoulder, {0.0, -0.28, 0.0}, Vec3::UnitZ(), 0.0, 2.4, 100.0, 10.0);
  hinge(r_wrist, "r_wrist", r_elbow, {0.0, -0.26, 0.0}, Vec3::UnitZ(), -1.0, 1.0, 30.0, 3.0);

  // Anthropometric mass fractions; they sum to exactly 1.
  const double fractions[humanoid::count] = {
      0.180, 0.300, 0.014, 0.060,          // pelvis, torso, neck, head
      0.110, 0.050, 0.014,                 // left thigh, shin, foot
      0.110, 0.050, 0.014,                 // right leg
      0.027, 0.016, 0.006,                 // left upper arm, forearm, hand
      0.027, 0.016, 0.006,                 // right arm
  };
  const Vec3 com[humanoid::count] = {
      {0.0, 0.0, 0.02},  {0.0, 0.0, 0.12},   {0.0, 0.0, 0.065}, {0.0, 0.0, 0.08},
      {0.0, 0.0, -0.21}, {0.0, 0.0, -0.20},  {0.06, 0.0, -0.04},
      {0.0, 0.0, -0.21}, {0.0, 0.0, -0.20},  {0.06, 0.0, -0.04},
      {0.0, 0.14, 0.0},  {0.0, 0.13, 0.0},   {0.0, 0.07, 0.0},
      {0.0, -0.14, 0.0}, {0.0, -0.13, 0.0},  {0.0, -0.07, 0.0},
  };
  const LinkShape shape[humanoid::count] = {
      {Vec3::UnitZ(), 0.25, 0.12}, {Vec3::UnitZ(), 0.40, 0.14},
      {Vec3::UnitZ(), 0.13, 0.05}, {Vec3::UnitZ(), 0.18, 0.09},
      {Vec3::UnitZ(), 0.42, 0.07}, {Vec3::UnitZ(), 0.40, 0.05},
      {Vec3::UnitX(), 0.18, 0.04},
      {Vec3::UnitZ(), 0.42, 0.07}, {Vec3::UnitZ(), 0.40, 0.05},
      {Vec3::UnitX(), 0.18, 0.04},
      {Vec3::UnitY(), 0.28, 0.045}, {Vec3::UnitY(), 0.26, 0.035},
      {Vec3::UnitY(), 0.15, 0.03},
      {Vec3::UnitY(), 0.28, 0.045}, {Vec3::UnitY(), 0.26, 0.035},
      {Vec3::UnitY(), 0.15, 0.03},
  };
  for (int j = 0; j < humanoid::count; ++j) {
    JointSpec& s = skel.joints[j];
    s.link_mass = fractions[j] * total_mass;
    s.com_offset = com[j];
    s.link_inertia = rod_inertia(s.link_mass, shape[j].axis, shape[j].length, shape[j].radius);
  }
  return skel;
}

std::vector<int> foot_joints(const SkeletonSpec& skel) {
  std::vector<int> out;
  for (const char* name : {"l_ankle", "r_ankle"}) {
    int j = skel.find_joint(name);
    if (j >= 0) out.push_back(j);
  }
  return out;
}

std::vector<int> end_effector_joints(const SkeletonSpec& skel) {
  std::vector<int> out;
  for (const char* name : {"l_ankle", "r_ankle", "l_wrist", "r_wrist", "head"}) {
    int j = skel.find_joint(name);
    if (j >= 0) out.push_back(j);
  }
  return out;
}

int head_joint(const SkeletonSpec& skel) { return skel.find_joint("head"); }

std::uint32_t skeleton_checksum(const SkeletonSpec& skel) {
  std::string buf;
  buf.reserve(4096);
  char line[512];
  std::snprintf(line, sizeof(line), "root=%d mass=%.17g fps=%.17g\n", skel.root_index,
                skel.total_mass, skel.fps_default);
  buf += line;
  for (const JointSpec& s : skel.joints) {
    std::snprintf(line, sizeof(line),
                  "%s parent=%d dof=%d off=%.17g,%.17g,%.17g axis=%.17g,%.17g,%.17g "
                  "lim=%.17g,%.17g kp=%.17g kd=%.17g m=%.17g com=%.17g,%.17g,%.17g",
                  s.name.c_str(), s.parent, s.dof == DofKind::ball ? 3 : 1, s.offset.x(),
                  s.offset.y(), s.offset.z(), s.axis.x(), s.axis.y(), s.axis.z(),
                  s.limits.lo, s.limits.hi, s.kp, s.kd, s.link_mass, s.com_offset.x(),
                  s.com_offset.y(), s.com_offset.z());
    buf += line;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(line, sizeof(line), " %.17g", s.link_inertia(r, c));
        buf += line;
      }
    buf += '\n';
  }
  return static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
}

}  // namespace poseloop::motion
