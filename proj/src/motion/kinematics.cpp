#include "poseloop/motion/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "poseloop/common/error.hpp"

namespace poseloop::motion {

namespace {

constexpr double kUnreachableThreshold = 5e-3;  // m

// Parents before children, root first.
std::vector<int> topo_order(const SkeletonSpec& skel) {
  int n = skel.joint_count();
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack = {skel.root_index};
  while (!stack.empty()) {
    int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (int c = n - 1; c >= 0; --c)
      if (c != skel.root_index && skel.joints[c].parent == j) stack.push_back(c);
  }
  if (static_cast<int>(order.size()) != n)
    throw DataError("skeleton is not a connected tree");
  return order;
}

void check_angle_layout(const SkeletonSpec& skel, const ReducedFrame& frame) {
  int expected = skel.non_root_dof();
  if (static_cast<int>(frame.angles.size()) == expected) return;
  int end = 0;
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    end += skel.dof_of(j);
    if (end > static_cast<int>(frame.angles.size()))
      throw DataError("angle vector too short at joint " + skel.joints[j].name +
                      ": expected " + std::to_string(expected) + " dof, got " +
                      std::to_string(frame.angles.size()));
  }
  throw DataError("angle vector has " + std::to_string(frame.angles.size()) +
                  " dof, skeleton expects " + std::to_string(expected));
}

Quat joint_quat(const SkeletonSpec& skel, const ReducedFrame& frame, int j) {
  const JointSpec& spec = skel.joints[j];
  int off = skel.angle_offset(j);
  if (spec.dof == DofKind::ball) return quat_exp(frame.angles.segment<3>(off));
  return Quat(Eigen::AngleAxisd(frame.angles[off], spec.axis));
}

// Signed angle from u to v about unit axis, both projected onto the plane
// perpendicular to the axis.
double signed_angle(const Vec3& u, const Vec3& v, const Vec3& axis) {
  Vec3 up = u - u.dot(axis) * axis;
  Vec3 vp = v - v.dot(axis) * axis;
  if (up.norm() < 1e-9 || vp.norm() < 1e-9) return 0.0;
  up.normalize();
  vp.normalize();
  return std::atan2(up.cross(vp).dot(axis), up.dot(vp));
}

// Best rotation taking each a_i to b_i (all unit vectors).
Quat kabsch(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty()) return Quat::Identity();
  if (a.size() == 1) return rotation_between(a[0], b[0]);
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) m += b[i] * a[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Quat(Mat3(u * d * v.transpose()));
}

// True at [j][k] when k lies strictly inside j's subtree.
std::vector<std::vector<bool>> descendant_table(const SkeletonSpec& skel) {
  int n = skel.joint_count();
  std::vector<std::vector<bool>> desc(n, std::vector<bool>(n, false));
  for (int k = 0; k < n; ++k) {
    int cur = k;
    while (cur != skel.root_index) {
      cur = skel.joints[cur].parent;
      desc[cur][k] = true;
    }
  }
  return desc;
}

// Swing/hinge/twist estimate of one frame from joint positions. Exact for
// inputs produced by this skeleton's FK up to unobservable leaf angles.
ReducedFrame analytic_frame_init(const SkeletonSpec& skel, const Eigen::MatrixXd& x,
                                 const std::vector<int>& order) {
  int root = skel.root_index;
  ReducedFrame frame;
  frame.angles = Eigen::VectorXd::Zero(skel.non_root_dof());
  frame.root_pos = x.row(root).transpose();

  std::vector<Quat> world(skel.joint_count(), Quat::Identity());
  std::vector<Vec3> rest_a, obs_b;
  for (int c : skel.children_of(root)) {
    rest_a.push_back(skel.joints[c].offset.normalized());
    obs_b.push_back((x.row(c).transpose() - frame.root_pos).normalized());
  }
  frame.root_rot = kabsch(rest_a, obs_b);
  world[root] = frame.root_rot;

  std::vector<bool> resolved(skel.joint_count(), false);

  auto hinge_angle = [&](int c, const Quat& pre) {
    const JointSpec& cs = skel.joints[c];
    auto kids = skel.children_of(c);
    if (kids.empty()) return 0.0;
    Vec3 d0 = skel.joints[kids[0]].offset.normalized();
    Vec3 d = pre.conjugate() *
             Vec3(x.row(kids[0]).transpose() - x.row(c).transpose()).normalized();
    return signed_angle(d0, d, cs.axis);
  };

  for (int j : order) {
    if (j == root || resolved[j]) continue;
    const JointSpec& spec = skel.joints[j];
    const Quat& rp = world[spec.parent];
    int off = skel.angle_offset(j);
    Vec3 pj = x.row(j).transpose();

    if (spec.dof == DofKind::hinge) {
      double theta = hinge_angle(j, rp);
      frame.angles[off] = theta;
      world[j] = rp * Quat(Eigen::AngleAxisd(theta, spec.axis));
      continue;
    }

    auto kids = skel.children_of(j);
    Quat q = Quat::Identity();
    if (kids.size() >= 2) {
      std::vector<Vec3> a, b;
      for (int c : kids) {
        a.push_back(skel.joints[c].offset.normalized());
        b.push_back(rp.conjugate() * Vec3(x.row(c).transpose() - pj).normalized());
      }
      q = kabsch(a, b);
    } else if (kids.size() == 1) {
      int c = kids[0];
      Vec3 obs = rp.conjugate() * Vec3(x.row(c).transpose() - pj).normalized();
      q = rotation_between(skel.joints[c].offset.normalized(), obs);
      // Hip/shoulder pattern: the grandchild fixes the twist about the bone.
      auto grand = skel.children_of(c);
      if (skel.joints[c].dof == DofKind::hinge && !grand.empty()) {
        int g = grand[0];
        Vec3 pc = x.row(c).transpose();
        Vec3 bone = (pc - pj).normalized();
        double theta = hinge_angle(c, rp * q);
        Quat wc = rp * q * Quat(Eigen::AngleAxisd(theta, skel.joints[c].axis));
        Vec3 pred = pc + wc * skel.joints[g].offset;
        Vec3 gobs = x.row(g).transpose();
        double twist = signed_angle(pred - pc, gobs - pc, bone);
        q = quat_exp(twist * (rp.conjugate() * bone)) * q;
        theta = hinge_angle(c, rp * q);
        frame.angles[skel.angle_offset(c)] = theta;
        world[c] = rp * q * Quat(Eigen::AngleAxisd(theta, skel.joints[c].axis));
        resolved[c] = true;
      }
    }
    frame.angles.segment<3>(off) = quat_log(q);
    world[j] = rp * q;
  }
  return frame;
}

}  // namespace

FrameTransforms frame_transforms(const SkeletonSpec& skel, const ReducedFrame& frame) {
  check_angle_layout(skel, frame);
  int n = skel.joint_count();
  FrameTransforms ft;
  ft.position.resize(n);
  ft.rotation.resize(n);
  ft.position[skel.root_index] = frame.root_pos;
  ft.rotation[skel.root_index] = frame.root_rot.normalized();
  for (int j : topo_order(skel)) {
    if (j == skel.root_index) continue;
    int p = skel.joints[j].parent;
    ft.position[j] = ft.position[p] + ft.rotation[p] * skel.joints[j].offset;
    ft.rotation[j] = ft.rotation[p] * joint_quat(skel, frame, j);
  }
  return ft;
}

Eigen::MatrixXd forward_kinematics_frame(const SkeletonSpec& skel,
                                         const ReducedFrame& frame) {
  FrameTransforms ft = frame_transforms(skel, frame);
  Eigen::MatrixXd out(skel.joint_count(), 3);
  for (int j = 0; j < skel.joint_count(); ++j) out.row(j) = ft.position[j].transpose();
  return out;
}

MotionSequence3D forward_kinematics(const SkeletonSpec& skel,
                                    const ReducedPoseSequence& reduced) {
  MotionSequence3D out;
  out.fps = reduced.fps;
  out.frames.reserve(reduced.frames.size());
  for (const ReducedFrame& f : reduced.frames)
    out.frames.push_back(forward_kinematics_frame(skel, f));
  return out;
}

IkResult inverse_kinematics(const SkeletonSpec& skel, const MotionSequence3D& motion,
                            const IkOptions& opts) {
  int n = skel.joint_count();
  if (motion.joint_count() != n)
    throw DataError("motion has " + std::to_string(motion.joint_count()) +
                    " joints, skeleton has " + std::to_string(n));
  if (motion.length() == 0) throw DataError("motion is empty");

  for (int t = 0; t < motion.length(); ++t)
    for (int j = 0; j < n; ++j) {
      if (j == skel.root_index) continue;
      double expect = skel.joints[j].offset.norm();
      double got = (motion.joint(t, j) - motion.joint(t, skel.joints[j].parent)).norm();
      if (std::abs(got - expect) > opts.bone_length_tolerance * expect)
        throw DataError("bone " + skel.joints[j].name + " at frame " + std::to_string(t) +
                        ": length " + std::to_string(got) + " m deviates from " +
                        std::to_string(expect) + " m beyond tolerance");
    }

  std::vector<int> order = topo_order(skel);
  auto desc = descendant_table(skel);
  int nd = 6 + skel.non_root_dof();

  IkResult result;
  result.reduced.fps = motion.fps;
  result.reduced.frames.reserve(motion.length());
  result.frame_residual.resize(motion.length());

  Eigen::MatrixXd jac(3 * n, nd);
  for (int t = 0; t < motion.length(); ++t) {
    const Eigen::MatrixXd& x = motion.frames[t];
    ReducedFrame frame = analytic_frame_init(skel, x, order);

    double maxerr = 0.0;
    for (int iter = 0; iter <= opts.max_iterations; ++iter) {
      FrameTransforms ft = frame_transforms(skel, frame);
      Eigen::VectorXd r(3 * n);
      maxerr = 0.0;
      for (int k = 0; k < n; ++k) {
        Vec3 e = x.row(k).transpose() - ft.position[k];
        r.segment<3>(3 * k) = e;
        maxerr = std::max(maxerr, e.norm());
      }
      if (maxerr < opts.target_residual || iter == opts.max_iterations) break;

      jac.setZero();
      for (int k = 0; k < n; ++k) {
        jac.block<3, 3>(3 * k, 0).setIdentity();
        if (k == skel.root_index) continue;
        Vec3 arm = ft.position[k] - frame.root_pos;
        for (int m = 0; m < 3; ++m)
          jac.block<3, 1>(3 * k, 3 + m) = Vec3::Unit(m).cross(arm);
      }
      for (int j = 0; j < n; ++j) {
        if (j == skel.root_index) continue;
        int col = 6 + skel.angle_offset(j);
        if (skel.joints[j].dof == DofKind::ball) {
          for (int m = 0; m < 3; ++m) {
            Vec3 w = ft.rotation[j] * Vec3::Unit(m);
            for (int k = 0; k < n; ++k)
              if (desc[j][k])
                jac.block<3, 1>(3 * k, col + m) = w.cross(Vec3(ft.position[k] - ft.position[j]));
          }
        } else {
          Vec3 w = ft.rotation[j] * skel.joints[j].axis;
          for (int k = 0; k < n; ++k)
            if (desc[j][k])
              jac.block<3, 1>(3 * k, col) = w.cross(Vec3(ft.position[k] - ft.position[j]));
        }
      }

      Eigen::MatrixXd h = jac.transpose() * jac;
      h.diagonal().array() += opts.lambda * opts.lambda;
      Eigen::VectorXd delta = h.ldlt().solve(jac.transpose() * r);

      frame.root_pos += delta.head<3>();
      frame.root_rot = (quat_exp(delta.segment<3>(3)) * frame.root_rot).normalized();
      for (int j = 0; j < n; ++j) {
        if (j == skel.root_index) continue;
        int off = skel.angle_offset(j);
        if (skel.joints[j].dof == DofKind::ball) {
          Quat q = quat_exp(frame.angles.segment<3>(off)) * quat_exp(delta.segment<3>(6 + off));
          frame.angles.segment<3>(off) = quat_log(q.normalized());
        } else {
          frame.angles[off] += delta[6 + off];
        }
      }
    }

    result.frame_residual[t] = maxerr;
    result.max_residual = std::max(result.max_residual, maxerr);
    result.reduced.frames.push_back(std::move(frame));
  }
  result.unreachable_flag = result.max_residual > kUnreachableThreshold;
  return result;
}

ReducedVelocitySequence finite_difference_velocities(const SkeletonSpec& skel,
                                                     const ReducedPoseSequence& reduced) {
  int t_count = reduced.length();
  if (t_count < 2) throw DataError("need at least 2 frames to differentiate");
  double dt = 1.0 / reduced.fps;

  auto rot_rate_world = [&](const Quat& a, const Quat& b, double span) {
    return Vec3(quat_log(b * a.conjugate()) / span);
  };

  ReducedVelocitySequence out(t_count);
  for (int t = 0; t < t_count; ++t) {
    int lo = std::max(0, t - 1);
    int hi = std::min(t_count - 1, t + 1);
    double span = (hi - lo) * dt;
    const ReducedFrame& a = reduced.frames[lo];
    const ReducedFrame& b = reduced.frames[hi];

    ReducedVelocity& v = out[t];
    v.root_lin = (b.root_pos - a.root_pos) / span;
    v.root_ang = rot_rate_world(a.root_rot, b.root_rot, span);
    v.angle_rates.resize(skel.non_root_dof());
    for (int j = 0; j < skel.joint_count(); ++j) {
      if (j == skel.root_index) continue;
      int off = skel.angle_offset(j);
      if (skel.joints[j].dof == DofKind::ball) {
        Quat qa = quat_exp(a.angles.segment<3>(off));
        Quat qb = quat_exp(b.angles.segment<3>(off));
        v.angle_rates.segment<3>(off) = quat_log(qa.conjugate() * qb) / span;
      } else {
        v.angle_rates[off] = (b.angles[off] - a.angles[off]) / span;
      }
    }
  }
  return out;
}

double heading_yaw(const SkeletonSpec& skel, const Quat& root_rot) {
  int lh = skel.find_joint("l_hip");
  int rh = skel.find_joint("r_hip");
  if (lh < 0 || rh < 0) return rotation_yaw(root_rot);
  Vec3 rest = skel.joints[rh].offset - skel.joints[lh].offset;
  Vec3 now = root_rot * rest;
  if (std::hypot(now.x(), now.y()) < 1e-8 || std::hypot(rest.x(), rest.y()) < 1e-8)
    return rotation_yaw(root_rot);
  return wrap_angle(std::atan2(now.y(), now.x()) - std::atan2(rest.y(), rest.x()));
}

FrameState to_heading_local(const SkeletonSpec& skel, const FrameState& state) {
  double yaw = heading_yaw(skel, state.pose.root_rot);
  Quat undo = yaw_quat(-yaw);
  FrameState out = state;
  out.pose.root_pos = Vec3(0.0, 0.0, state.pose.root_pos.z());
  out.pose.root_rot = (undo * state.pose.root_rot).normalized();
  out.velocity.root_lin = undo * state.velocity.root_lin;
  out.velocity.root_ang = undo * state.velocity.root_ang;
  return out;
}

std::vector<Vec3> joint_velocities(const SkeletonSpec& skel, const FrameState& state) {
  check_angle_layout(skel, state.pose);
  if (state.velocity.angle_rates.size() != skel.non_root_dof())
    throw DataError("joint_velocities: rate layout does not match the skeleton");
  FrameTransforms ft = frame_transforms(skel, state.pose);
  std::vector<Vec3> lin(skel.joint_count());
  std::vector<Vec3> ang(skel.joint_count());
  for (int j : topo_order(skel)) {
    if (j == skel.root_index) {
      lin[j] = state.velocity.root_lin;
      ang[j] = state.velocity.root_ang;
      continue;
    }
    int p = skel.joints[j].parent;
    int off = skel.angle_offset(j);
    lin[j] = lin[p] + ang[p].cross(ft.rotation[p] * skel.joints[j].offset);
    if (skel.joints[j].dof == DofKind::ball)
      ang[j] = ang[p] + ft.rotation[j] * Vec3(state.velocity.angle_rates.segment<3>(off));
    else
      ang[j] = ang[p] + ft.rotation[p] * (skel.joints[j].axis * state.velocity.angle_rates[off]);
  }
  return lin;
}

ReducedFrame rest_frame(const SkeletonSpec& skel) {
  ReducedFrame frame;
  frame.root_pos = skel.joints[skel.root_index].offset;
  frame.root_rot = Quat::Identity();
  frame.angles = Eigen::VectorXd::Zero(skel.non_root_dof());
  return frame;
}

std::vector<Vec3> rest_positions(const SkeletonSpec& skel) {
  FrameTransforms ft = frame_transforms(skel, rest_frame(skel));
  return ft.position;
}

double bone_length(const SkeletonSpec& skel, int j) { return skel.joints[j].offset.norm(); }

}  // namespace poseloop::motion
