#include "poseloop/imit/featurize.hpp"

#include <algorithm>

#include "poseloop/common/error.hpp"

namespace poseloop::imit {

using motion::DofKind;
using motion::Quat;
using motion::quat_exp;
using motion::quat_log;
using motion::Vec3;
using motion::yaw_quat;

PhiEncoder::PhiEncoder(neural::ParamStore& store, const std::string& prefix,
                       const SkeletonSpec& skel, Rng& rng)
    : c1_(store, prefix + ".c1", 6 + skel.non_root_dof(), kChannels, kPast, 1, rng),
      c2_(store, prefix + ".c2", kChannels, kChannels, kFuture + 2, 1, rng),
      in_ch_(6 + skel.non_root_dof()) {}

Mat PhiEncoder::window_input(const SkeletonSpec& skel, const ReducedPoseSequence& ref,
                             int t) const {
  const int T = ref.length();
  const motion::ReducedFrame& anchor = ref.frames[t];
  const double yaw = motion::heading_yaw(skel, anchor.root_rot);
  const Quat unyaw = yaw_quat(yaw).conjugate();

  Mat x(in_ch_, window());
  for (int w = 0; w < window(); ++w) {
    const int s = std::clamp(t - kPast + w, 0, T - 1);
    const motion::ReducedFrame& f = ref.frames[s];
    x.block<3, 1>(0, w) = unyaw * (f.root_pos - anchor.root_pos);
    x.block<3, 1>(3, w) = quat_log(unyaw * f.root_rot);
    x.block(6, w, f.angles.size(), 1) = f.angles;
  }
  return x;
}

Eigen::VectorXd PhiEncoder::encode_frame(const SkeletonSpec& skel,
                                         const ReducedPoseSequence& ref, int t) const {
  const Mat h1 = c1_.infer(window_input(skel, ref, t)).cwiseMax(0.0);
  return c2_.infer(h1).col(0).array().tanh();
}

Mat PhiEncoder::encode_clip(const SkeletonSpec& skel, const ReducedPoseSequence& ref) const {
  Mat out(kChannels, ref.length());
  for (int t = 0; t < ref.length(); ++t) out.col(t) = encode_frame(skel, ref, t);
  return out;
}

Eigen::VectorXd ImitatorState::flat() const {
  Eigen::VectorXd out(q.size() + qdot.size() + target.size() + phi.size());
  out << q, qdot, target, phi;
  return out;
}

int imitator_obs_dim(const SkeletonSpec& skel) {
  const int nd = skel.non_root_dof();
  return (5 + nd) + (6 + nd) + (6 + nd) + PhiEncoder::kChannels;
}

ImitatorState featurize_state(const SkeletonSpec& skel, const FrameState& sim,
                              const ReducedPoseSequence& reference, int t,
                              const PhiEncoder& encoder, const Mat* phi_cache) {
  const int T = reference.length();
  if (t < 0 || t >= T) {
    throw DataError("featurize_state: t=" + std::to_string(t) + " outside clip of length " +
                    std::to_string(T));
  }
  const int nd = skel.non_root_dof();
  const double yaw = motion::heading_yaw(skel, sim.pose.root_rot);
  const Quat unyaw = yaw_quat(yaw).conjugate();

  ImitatorState s;
  s.q.resize(5 + nd);
  Quat tilt = unyaw * sim.pose.root_rot;
  if (tilt.w() < 0.0) tilt.coeffs() = -tilt.coeffs();
  s.q[0] = sim.pose.root_pos.z();
  s.q[1] = tilt.w();
  s.q.segment<3>(2) = tilt.vec();
  s.q.tail(nd) = sim.pose.angles;

  s.qdot.resize(6 + nd);
  s.qdot.head<3>() = unyaw * sim.velocity.root_ang;
  s.qdot.segment<3>(3) = unyaw * sim.velocity.root_lin;
  s.qdot.tail(nd) = sim.velocity.angle_rates;

  const motion::ReducedFrame& tgt = reference.frames[std::min(t + 1, T - 1)];
  s.target.resize(6 + nd);
  s.target.head<3>() = unyaw * (tgt.root_pos - sim.pose.root_pos);
  s.target.segment<3>(3) = quat_log(sim.pose.root_rot.conjugate() * tgt.root_rot);
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    const int off = skel.angle_offset(j);
    if (skel.joints[j].dof == DofKind::ball) {
      const Quat qs = quat_exp(sim.pose.angles.segment<3>(off));
      const Quat qr = quat_exp(tgt.angles.segment<3>(off));
      s.target.segment<3>(6 + off) = quat_log(qs.conjugate() * qr);
    } else {
      s.target[6 + off] = tgt.angles[off] - sim.pose.angles[off];
    }
  }

  if (phi_cache != nullptr) {
    s.phi = phi_cache->col(t);
  } else {
    s.phi = encoder.encode_frame(skel, reference, t);
  }
  return s;
}

}  // namespace poseloop::imit
