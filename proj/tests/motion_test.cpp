#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "poseloop/common/error.hpp"
#include "poseloop/common/rng.hpp"
#include "poseloop/motion/kinematics.hpp"
#include "poseloop/motion/skeleton.hpp"

using namespace poseloop;
using namespace poseloop::motion;

namespace {

Quat random_quat(Rng& rng) {
  // Shepperd-style uniform quaternion from three uniforms.
  double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Quat(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
              b * std::sin(2 * M_PI * u3), b * std::cos(2 * M_PI * u3))
      .normalized();
}

// Random pose with every coordinate inside its joint's limits.
ReducedFrame random_frame(const SkeletonSpec& skel, Rng& rng) {
  ReducedFrame f;
  f.root_pos = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1.5));
  f.root_rot = random_quat(rng);
  f.angles = Eigen::VectorXd::Zero(skel.non_root_dof());
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    int off = skel.angle_offset(j);
    const auto& lim = skel.joints[j].limits;
    for (int d = 0; d < skel.dof_of(j); ++d)
      f.angles[off + d] = rng.uniform(lim.lo, lim.hi);
  }
  return f;
}

}  // namespace

TEST_CASE("quat exp/log round trip") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    Vec3 rv = axis * rng.uniform(1e-8, M_PI - 1e-6);
    CHECK((quat_log(quat_exp(rv)) - rv).norm() < 1e-10);
  }
  CHECK(quat_log(Quat::Identity()).norm() == 0.0);
  // log ignores the double-cover sign.
  Quat q = quat_exp(Vec3(0.3, -0.2, 0.9));
  Quat qneg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK((quat_log(q) - quat_log(qneg)).norm() < 1e-12);
}

TEST_CASE("default humanoid validates") {
  SkeletonSpec skel = default_humanoid();
  SkeletonReport report = validate_skeleton(skel);
  for (const auto& v : report.violations) MESSAGE(v.what);
  CHECK(report.ok());
  CHECK(skel.joint_count() == humanoid::count);
  CHECK(skel.non_root_dof() == 27);
  double mass = 0.0;
  for (const auto& j : skel.joints) mass += j.link_mass;
  CHECK(mass == doctest::Approx(70.0).epsilon(1e-9));
  CHECK(foot_joints(skel) == std::vector<int>{humanoid::l_ankle, humanoid::r_ankle});
  CHECK(end_effector_joints(skel).size() == 5);
  CHECK(head_joint(skel) == humanoid::head);
}

TEST_CASE("validator rejects broken skeletons") {
  auto broken = [](auto mutate) {
    SkeletonSpec s = default_humanoid();
    mutate(s);
    return !validate_skeleton(s).ok();
  };
  CHECK(broken([](SkeletonSpec& s) { s.joints[3].offset.setZero(); }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[5].link_mass = -1.0; }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[5].link_mass *= 2.0; }));  // mass sum
  CHECK(broken([](SkeletonSpec& s) { s.joints[2].limits = {1.0, -1.0}; }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[humanoid::l_knee].axis *= 2.0; }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[1].parent = 99; }));
  CHECK(broken([](SkeletonSpec& s) {
    s.joints[1].parent = 2;  // spine<->neck cycle, detached from the root
    s.joints[2].parent = 1;
  }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[4].link_inertia = -Mat3::Identity(); }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[0].kp = -1.0; }));
  CHECK(broken([](SkeletonSpec& s) { s.joints[7].name = "l_hip"; }));
}

TEST_CASE("skeleton checksum is stable and content-sensitive") {
  std::uint32_t a = skeleton_checksum(default_humanoid());
  std::uint32_t b = skeleton_checksum(default_humanoid());
  CHECK(a == b);
  SkeletonSpec s = default_humanoid();
  s.joints[5].kp += 1.0;
  CHECK(skeleton_checksum(s) != a);
  SkeletonSpec t = default_humanoid(71.0);
  CHECK(skeleton_checksum(t) != a);
}

TEST_CASE("rest pose geometry") {
  SkeletonSpec skel = default_humanoid();
  auto pos = rest_positions(skel);
  CHECK((pos[humanoid::pelvis] - Vec3(0, 0, 0.95)).norm() < 1e-12);
  CHECK(pos[humanoid::l_ankle].z() == doctest::Approx(0.07));
  CHECK(pos[humanoid::r_ankle].z() == doctest::Approx(0.07));
  // T-pose is left/right mirror symmetric about the xz plane.
  CHECK((pos[humanoid::l_wrist] - Vec3(pos[humanoid::r_wrist].x(), -pos[humanoid::r_wrist].y(),
                                       pos[humanoid::r_wrist].z()))
            .norm() < 1e-12);
  CHECK(pos[humanoid::head].z() > pos[humanoid::neck].z());
}

// Leg chain poses composed by hand from rotation matrices. With the knee
// hinge at +90deg about y, the shin offset (0,0,-0.40) maps to (-0.40,0,0).
TEST_CASE("fk matches hand-composed rotations on the leg chain") {
  SkeletonSpec skel = default_humanoid();
  ReducedFrame f = rest_frame(skel);

  SUBCASE("knee only") {
    f.angles[skel.angle_offset(humanoid::l_knee)] = M_PI / 2;
    auto x = forward_kinematics_frame(skel, f);
    CHECK((Vec3(x.row(humanoid::l_knee)) - Vec3(0.0, 0.10, 0.47)).norm() < 1e-12);
    CHECK((Vec3(x.row(humanoid::l_ankle)) - Vec3(-0.40, 0.10, 0.47)).norm() < 1e-12);
  }
  SUBCASE("hip 90deg about y then knee 90deg") {
    f.angles.segment<3>(skel.angle_offset(humanoid::l_hip)) = Vec3(0, M_PI / 2, 0);
    f.angles[skel.angle_offset(humanoid::l_knee)] = M_PI / 2;
    auto x = forward_kinematics_frame(skel, f);
    CHECK((Vec3(x.row(humanoid::l_knee)) - Vec3(-0.42, 0.10, 0.89)).norm() < 1e-12);
    CHECK((Vec3(x.row(humanoid::l_ankle)) - Vec3(-0.42, 0.10, 1.29)).norm() < 1e-12);
  }
  SUBCASE("root yaw moves the hip sideways") {
    f.root_rot = yaw_quat(M_PI / 2);
    auto x = forward_kinematics_frame(skel, f);
    CHECK((Vec3(x.row(humanoid::l_hip)) - Vec3(-0.10, 0.0, 0.89)).norm() < 1e-12);
  }
}

TEST_CASE("fk is equivariant under rigid root transforms") {
  SkeletonSpec skel = default_humanoid();
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    ReducedFrame f = random_frame(skel, rng);
    Quat g = random_quat(rng);
    Vec3 t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    ReducedFrame moved = f;
    moved.root_pos = g * f.root_pos + t;
    moved.root_rot = (g * f.root_rot).normalized();
    auto a = forward_kinematics_frame(skel, f);
    auto b = forward_kinematics_frame(skel, moved);
    for (int j = 0; j < skel.joint_count(); ++j) {
      Vec3 expect = g * Vec3(a.row(j)) + t;
      CHECK((Vec3(b.row(j)) - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("fk preserves bone lengths") {
  SkeletonSpec skel = default_humanoid();
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    auto x = forward_kinematics_frame(skel, random_frame(skel, rng));
    for (int j = 0; j < skel.joint_count(); ++j) {
      if (j == skel.root_index) continue;
      double len = (Vec3(x.row(j)) - Vec3(x.row(skel.joints[j].parent))).norm();
      CHECK(len == doctest::Approx(bone_length(skel, j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("fk rejects a wrong angle layout") {
  SkeletonSpec skel = default_humanoid();
  ReducedFrame f = rest_frame(skel);
  f.angles = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(forward_kinematics_frame(skel, f), DataError);
}

TEST_CASE("ik recovers fk poses") {
  SkeletonSpec skel = default_humanoid();
  Rng rng(42);
  MotionSequence3D motion;
  motion.fps = 30.0;
  ReducedPoseSequence truth;
  truth.fps = 30.0;
  for (int i = 0; i < 200; ++i) {
    truth.frames.push_back(random_frame(skel, rng));
    motion.frames.push_back(forward_kinematics_frame(skel, truth.frames.back()));
  }
  IkResult ik = inverse_kinematics(skel, motion);
  CHECK_FALSE(ik.unreachable_flag);
  double total = 0.0;
  int count = 0;
  for (int t = 0; t < motion.length(); ++t) {
    auto x = forward_kinematics_frame(skel, ik.reduced.frames[t]);
    for (int j = 0; j < skel.joint_count(); ++j) {
      total += (Vec3(x.row(j)) - motion.joint(t, j)).norm();
      ++count;
    }
  }
  CHECK(total / count < 5e-3);
  CHECK(ik.max_residual < 5e-3);
}

TEST_CASE("ik rejects out-of-tolerance bone lengths") {
  SkeletonSpec skel = default_humanoid();
  ReducedFrame f = rest_frame(skel);
  MotionSequence3D motion;
  motion.frames.push_back(forward_kinematics_frame(skel, f));
  // Stretch the left shin by 30%.
  Vec3 knee = motion.joint(0, humanoid::l_knee);
  Vec3 ankle = motion.joint(0, humanoid::l_ankle);
  motion.frames[0].row(humanoid::l_ankle) = (knee + 1.3 * (ankle - knee)).transpose();
  CHECK_THROWS_AS(inverse_kinematics(skel, motion), DataError);
}

TEST_CASE("finite differences recover constant rates exactly") {
  SkeletonSpec skel = default_humanoid();
  double fps = 30.0;
  Vec3 lin(0.7, -0.3, 0.1);
  Vec3 omega_world(0.4, 0.2, -0.5);
  Vec3 omega_hip(0.9, -0.6, 0.3);
  double knee_rate = 1.3;

  ReducedPoseSequence seq;
  seq.fps = fps;
  int hip_off = skel.angle_offset(humanoid::l_hip);
  int knee_off = skel.angle_offset(humanoid::l_knee);
  for (int t = 0; t < 10; ++t) {
    double time = t / fps;
    ReducedFrame f = rest_frame(skel);
    f.root_pos += lin * time;
    f.root_rot = (quat_exp(omega_world * time) * Quat::Identity()).normalized();
    f.angles.segment<3>(hip_off) = omega_hip * time;  // constant axis: rotvec is linear
    f.angles[knee_off] = knee_rate * time;
    seq.frames.push_back(f);
  }
  auto vel = finite_difference_velocities(skel, seq);
  for (int t = 0; t < 10; ++t) {
    CHECK((vel[t].root_lin - lin).norm() < 1e-9);
    CHECK((vel[t].root_ang - omega_world).norm() < 1e-9);
    CHECK((Vec3(vel[t].angle_rates.segment<3>(hip_off)) - omega_hip).norm() < 1e-9);
    CHECK(vel[t].angle_rates[knee_off] == doctest::Approx(knee_rate).epsilon(1e-9));
  }
}

TEST_CASE("finite differences are exact for quadratic hinge motion") {
  SkeletonSpec skel = default_humanoid();
  ReducedPoseSequence seq;
  seq.fps = 30.0;
  int knee_off = skel.angle_offset(humanoid::l_knee);
  for (int t = 0; t < 8; ++t) {
    ReducedFrame f = rest_frame(skel);
    double time = t / seq.fps;
    f.angles[knee_off] = 0.5 * time * time;
    seq.frames.push_back(f);
  }
  auto vel = finite_difference_velocities(skel, seq);
  // Central differences differentiate quadratics exactly at interior frames.
  for (int t = 1; t < 7; ++t)
    CHECK(vel[t].angle_rates[knee_off] == doctest::Approx(t / seq.fps).epsilon(1e-9));
}

TEST_CASE("finite differences need two frames") {
  SkeletonSpec skel = default_humanoid();
  ReducedPoseSequence seq;
  seq.frames.push_back(rest_frame(skel));
  CHECK_THROWS_AS(finite_difference_velocities(skel, seq), DataError);
}

TEST_CASE("heading yaw tracks root yaw") {
  SkeletonSpec skel = default_humanoid();
  CHECK(heading_yaw(skel, Quat::Identity()) == doctest::Approx(0.0));
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    double yaw = rng.uniform(-M_PI, M_PI);
    CHECK(heading_yaw(skel, yaw_quat(yaw)) == doctest::Approx(yaw).epsilon(1e-9));
    // Pitch and roll applied after the yaw must not change the heading much;
    // small tilts keep the hip axis near the ground plane.
    Quat tilted = yaw_quat(yaw) * quat_exp(Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0));
    CHECK(std::abs(wrap_angle(heading_yaw(skel, tilted) - yaw)) < 0.35);
  }
}

TEST_CASE("heading localization is idempotent and yaw-invariant") {
  SkeletonSpec skel = default_humanoid();
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    FrameState state;
    state.pose = random_frame(skel, rng);
    state.velocity.root_lin = Vec3(rng.normal(), rng.normal(), rng.normal());
    state.velocity.root_ang = Vec3(rng.normal(), rng.normal(), rng.normal());
    state.velocity.angle_rates = Eigen::VectorXd::Zero(skel.non_root_dof());

    FrameState local = to_heading_local(skel, state);
    CHECK(std::abs(heading_yaw(skel, local.pose.root_rot)) < 1e-9);
    CHECK(local.pose.root_pos.x() == 0.0);
    CHECK(local.pose.root_pos.y() == 0.0);
    CHECK(local.pose.root_pos.z() == state.pose.root_pos.z());

    FrameState twice = to_heading_local(skel, local);
    CHECK(quat_angle(twice.pose.root_rot, local.pose.root_rot) < 1e-9);
    CHECK((twice.velocity.root_lin - local.velocity.root_lin).norm() < 1e-9);

    // A global yaw plus horizontal shift of the input leaves the local view unchanged.
    double alpha = rng.uniform(-M_PI, M_PI);
    Quat g = yaw_quat(alpha);
    FrameState moved = state;
    moved.pose.root_pos = g * state.pose.root_pos + Vec3(rng.normal(), rng.normal(), 0.0);
    moved.pose.root_pos.z() = state.pose.root_pos.z();
    moved.pose.root_rot = (g * state.pose.root_rot).normalized();
    moved.velocity.root_lin = g * state.velocity.root_lin;
    moved.velocity.root_ang = g * state.velocity.root_ang;
    FrameState local2 = to_heading_local(skel, moved);
    CHECK(quat_angle(local2.pose.root_rot, local.pose.root_rot) < 1e-9);
    CHECK((local2.velocity.root_lin - local.velocity.root_lin).norm() < 1e-9);
    CHECK((local2.velocity.root_ang - local.velocity.root_ang).norm() < 1e-9);
  }
}

TEST_CASE("seed derivation separates labels and indices") {
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, std::uint64_t{0}) != derive_seed(1, std::uint64_t{1}));
  CHECK(derive_seed(5, "x") == derive_seed(5, "x"));
}
