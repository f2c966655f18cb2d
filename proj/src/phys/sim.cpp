#include "poseloop/phys/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "poseloop/common/error.hpp"

namespace poseloop::phys {

using motion::DofKind;
using motion::JointSpec;

std::vector<ContactSphere> default_contact_spheres(const SkeletonSpec& skel) {
  std::vector<ContactSphere> out;
  auto add = [&](const char* name, const Vec3& off, double radius) {
    int j = skel.find_joint(name);
    if (j >= 0) out.push_back({j, off, radius});
  };
  // heel/toe pair centered on the ankle so flat feet load both spheres evenly
  for (const char* ankle : {"l_ankle", "r_ankle"}) {
    add(ankle, Vec3(-0.07, 0.0, -0.045), 0.025);  // heel
    add(ankle, Vec3(0.07, 0.0, -0.045), 0.025);   // toe
  }
  add("pelvis", Vec3::Zero(), 0.10);
  add("head", Vec3(0.0, 0.0, 0.08), 0.09);
  add("l_wrist", Vec3(0.0, 0.07, 0.0), 0.03);
  add("r_wrist", Vec3(0.0, -0.07, 0.0), 0.03);
  add("l_knee", Vec3::Zero(), 0.05);
  add("r_knee", Vec3::Zero(), 0.05);
  add("l_elbow", Vec3::Zero(), 0.04);
  add("r_elbow", Vec3::Zero(), 0.04);
  return out;
}

Eigen::VectorXd pd_torque(const SkeletonSpec& skel, const Eigen::VectorXd& q_joint,
                          const Eigen::VectorXd& qdot_joint, const Eigen::VectorXd& u_nr) {
  int nd = skel.non_root_dof();
  if (q_joint.size() != nd || qdot_joint.size() != nd || u_nr.size() != nd)
    throw DataError("pd_torque: angle/rate/target size does not match non-root dof count");
  Eigen::VectorXd tau(nd);
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    const JointSpec& spec = skel.joints[j];
    int off = skel.angle_offset(j);
    int n = skel.dof_of(j);
    tau.segment(off, n) = spec.kp * (u_nr.segment(off, n) - q_joint.segment(off, n)) -
                          spec.kd * qdot_joint.segment(off, n);
  }
  return tau;
}

Simulator::Simulator(const SkeletonSpec& skel, const SimConfig& config)
    : model_(PhysModel::build(skel)), config_(config), spheres_(default_contact_spheres(skel)) {
  if (config_.substeps < 1) throw ConfigError("substeps must be >= 1");
  if (config_.contact_stiffness <= 0.0) throw ConfigError("contact stiffness must be > 0");
  if (config_.control_fps <= 0.0) throw ConfigError("control_fps must be > 0");
  pose_ = motion::rest_frame(skel);
  vel_ = Eigen::VectorXd::Zero(model_.nv);
  int n = skel.joint_count();
  ia_.resize(n);
  pa_.resize(n);
  bias_.resize(n);
  acc_.resize(n);
  u_.resize(n);
  dinv_.resize(n);
  ujnt_.resize(n);
  refresh_kinematics();
}

void Simulator::refresh_kinematics() {
  compute_link_kinematics(model_, pose_, vel_, config_.root_fixed, kin_);
}

void Simulator::set_state(const motion::FrameState& state) {
  const SkeletonSpec& skel = *model_.skel;
  if (state.pose.angles.size() != skel.non_root_dof() ||
      state.velocity.angle_rates.size() != skel.non_root_dof())
    throw DataError("set_state: angle layout does not match the skeleton");
  pose_ = state.pose;
  pose_.root_rot.normalize();
  Mat3 rot = pose_.root_rot.toRotationMatrix();
  vel_.head<3>() = rot.transpose() * state.velocity.root_ang;
  vel_.segment<3>(3) = rot.transpose() * state.velocity.root_lin;
  vel_.tail(skel.non_root_dof()) = state.velocity.angle_rates;
  if (config_.root_fixed) vel_.head<6>().setZero();
  refresh_kinematics();
}

motion::FrameState Simulator::state() const {
  motion::FrameState st;
  st.pose = pose_;
  Mat3 rot = pose_.root_rot.toRotationMatrix();
  st.velocity.root_ang = rot * vel_.head<3>();
  st.velocity.root_lin = rot * vel_.segment<3>(3);
  st.velocity.angle_rates = vel_.tail(model_.skel->non_root_dof());
  return st;
}

void Simulator::accumulate_contact_forces(std::vector<Vec6>& ext_world) const {
  double h = config_.substep_dt();
  for (const ContactSphere& s : spheres_) {
    const LinkKin& k = kin_[s.joint];
    Vec3 center = k.pos_world + k.rot_world * s.offset;
    double depth = s.radius - center.z();
    if (depth <= 0.0) continue;
    // impulse-limited damping keeps the explicit damper stable on light links
    double damping =
        std::min(config_.contact_damping, 0.25 * model_.skel->joints[s.joint].link_mass / h);
    Vec3 cp(center.x(), center.y(), center.z() - s.radius);
    Vec3 w_world = k.rot_world * Vec3(k.v.head<3>());
    Vec3 v_origin = k.rot_world * Vec3(k.v.tail<3>());
    Vec3 v_cp = v_origin + w_world.cross(cp - k.pos_world);
    double fz = config_.contact_stiffness * depth - damping * v_cp.z();
    if (fz <= 0.0) continue;
    Vec3 ft = -damping * Vec3(v_cp.x(), v_cp.y(), 0.0);
    double cap = config_.friction_mu * fz;
    double ft_norm = ft.norm();
    if (ft_norm > cap) ft *= cap / ft_norm;
    Vec3 f = ft + Vec3(0.0, 0.0, fz);
    ext_world[s.joint].head<3>() += (cp - k.pos_world).cross(f);
    ext_world[s.joint].tail<3>() += f;
  }
}

void Simulator::forward_dynamics(const Eigen::VectorXd& joint_torques,
                                 const std::vector<Vec6>& ext_world,
                                 const Eigen::VectorXd& damping_h, Eigen::VectorXd& qdd) {
  const int root = model_.root;

  for (int j : model_.order) {
    const LinkModel& link = model_.links[j];
    const LinkKin& k = kin_[j];
    bias_[j] = (j == root) ? Vec6::Zero()
                           : crm(k.v, Vec6(link.s.leftCols(link.nd) *
                                           vel_.segment(link.voff, link.nd)));
    ia_[j] = link.inertia;
    Vec6 f_body;
    f_body.head<3>() = k.rot_world.transpose() * ext_world[j].head<3>();
    f_body.tail<3>() = k.rot_world.transpose() * ext_world[j].tail<3>();
    pa_[j] = crf(k.v, link.inertia * k.v) - f_body;
  }

  for (auto it = model_.order.rbegin(); it != model_.order.rend(); ++it) {
    int j = *it;
    const LinkModel& link = model_.links[j];
    int nd = link.nd;
    auto s = link.s.leftCols(nd);
    u_[j].leftCols(nd) = ia_[j] * s;
    Eigen::MatrixXd d = s.transpose() * u_[j].leftCols(nd);
    if (j != root && damping_h.size() > 0)
      d.diagonal() += damping_h.segment(link.voff - 6, nd);
    dinv_[j].topLeftCorner(nd, nd) = d.inverse();
    Eigen::VectorXd tau =
        (j == root) ? Eigen::VectorXd(Eigen::VectorXd::Zero(6))
                    : Eigen::VectorXd(joint_torques.segment(link.voff - 6, nd));
    ujnt_[j].head(nd) = tau - s.transpose() * pa_[j];
    if (j == root) continue;

    auto udinv = u_[j].leftCols(nd) * dinv_[j].topLeftCorner(nd, nd);
    Mat66 ia_art = ia_[j] - udinv * u_[j].leftCols(nd).transpose();
    Vec6 pa_art = pa_[j] + ia_art * bias_[j] + udinv * ujnt_[j].head(nd);
    Mat66 x = kin_[j].to_body.motion_matrix();
    ia_[link.parent] += x.transpose() * ia_art * x;
    pa_[link.parent] += kin_[j].to_body.transpose_force(pa_art);
  }

  qdd.setZero(model_.nv);
  for (int j : model_.order) {
    const LinkModel& link = model_.links[j];
    int nd = link.nd;
    Vec6 a_parent;
    if (j == root) {
      Vec6 a_world = Vec6::Zero();
      a_world[5] = config_.gravity;  // accelerating the base upward stands in for gravity
      a_parent = kin_[j].to_body.apply_motion(a_world);
      if (config_.root_fixed) {
        acc_[j] = a_parent;
        continue;
      }
    } else {
      a_parent = kin_[j].to_body.apply_motion(acc_[link.parent]) + bias_[j];
    }
    Eigen::VectorXd seg =
        dinv_[j].topLeftCorner(nd, nd) *
        (ujnt_[j].head(nd) - u_[j].leftCols(nd).transpose() * a_parent);
    qdd.segment(link.voff, nd) = seg;
    acc_[j] = a_parent + link.s.leftCols(nd) * seg;
  }
}

void Simulator::integrate(const Eigen::VectorXd& qdd, double h) {
  const SkeletonSpec& skel = *model_.skel;
  if (!config_.root_fixed) {
    vel_.head<6>() += h * qdd.head<6>();
    Mat3 rot = pose_.root_rot.toRotationMatrix();
    pose_.root_pos += h * (rot * vel_.segment<3>(3));
    pose_.root_rot = (pose_.root_rot * motion::quat_exp(h * vel_.head<3>())).normalized();
  }
  vel_.tail(model_.nv - 6) += h * qdd.tail(model_.nv - 6);
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    int off = skel.angle_offset(j);
    if (skel.joints[j].dof == DofKind::ball) {
      Quat q = motion::quat_exp(pose_.angles.segment<3>(off)) *
               motion::quat_exp(h * Vec3(vel_.segment<3>(6 + off)));
      pose_.angles.segment<3>(off) = motion::quat_log(q.normalized());
    } else {
      pose_.angles[off] += h * vel_[6 + off];
    }
  }
  refresh_kinematics();
}

void Simulator::check_health() {
  bool finite = pose_.root_pos.allFinite() && pose_.root_rot.coeffs().allFinite() &&
                pose_.angles.allFinite() && vel_.allFinite();
  double peak = finite ? vel_.cwiseAbs().maxCoeff() : 0.0;
  if (finite && peak <= config_.velocity_blowup) return;
  std::ostringstream msg;
  msg << "simulation blowup at t=" << time_ << "s: ";
  if (!finite)
    msg << "non-finite state";
  else
    msg << "peak generalized rate " << peak << " exceeds " << config_.velocity_blowup;
  msg << ", root at (" << pose_.root_pos.x() << ", " << pose_.root_pos.y() << ", "
      << pose_.root_pos.z() << ")";
  throw SimBlowupError(msg.str());
}

void Simulator::step_internal(const Eigen::VectorXd& joint_torques, const Vec3& residual_force,
                              const Vec3& residual_torque, const Eigen::VectorXd& damping_h) {
  if (joint_torques.size() != model_.nv - 6)
    throw DataError("substep: torque vector does not match non-root dof count");
  std::vector<Vec6> ext(model_.links.size(), Vec6::Zero());
  if (config_.contacts_enabled) accumulate_contact_forces(ext);
  ext[model_.root].head<3>() += residual_torque;
  ext[model_.root].tail<3>() += residual_force;

  Eigen::VectorXd qdd;
  forward_dynamics(joint_torques, ext, damping_h, qdd);
  integrate(qdd, config_.substep_dt());
  time_ += config_.substep_dt();
  check_health();
}

void Simulator::substep(const Eigen::VectorXd& joint_torques, const Vec3& residual_force,
                        const Vec3& residual_torque) {
  step_internal(joint_torques, residual_force, residual_torque, Eigen::VectorXd());
}

void Simulator::control_step(const Action& action) {
  const SkeletonSpec& skel = *model_.skel;
  int nd = skel.non_root_dof();
  if (action.pd_targets.size() != nd)
    throw DataError("control_step: pd target vector does not match non-root dof count");

  Eigen::VectorXd targets = action.pd_targets;
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    int off = skel.angle_offset(j);
    for (int d = 0; d < skel.dof_of(j); ++d)
      targets[off + d] = std::clamp(targets[off + d], skel.joints[j].limits.lo,
                                    skel.joints[j].limits.hi);
  }
  auto clamp3 = [](const Vec3& v, double bound) {
    return Vec3(std::clamp(v.x(), -bound, bound), std::clamp(v.y(), -bound, bound),
                std::clamp(v.z(), -bound, bound));
  };
  Vec3 eta_f = clamp3(action.residual_force, config_.residual_force_max);
  Vec3 eta_t = clamp3(action.residual_torque, config_.residual_torque_max);

  Eigen::VectorXd damping_h(nd);
  for (int j = 0; j < skel.joint_count(); ++j) {
    if (j == skel.root_index) continue;
    damping_h.segment(skel.angle_offset(j), skel.dof_of(j))
        .setConstant(skel.joints[j].kd * config_.substep_dt());
  }

  for (int i = 0; i < config_.substeps; ++i) {
    Eigen::VectorXd tau = pd_torque(skel, pose_.angles, vel_.tail(nd), targets);
    step_internal(tau, eta_f, eta_t, damping_h);
  }
}

Vec3 Simulator::linear_momentum() const { return phys::linear_momentum(model_, kin_); }

Vec3 Simulator::angular_momentum() const {
  const SkeletonSpec& skel = *model_.skel;
  Vec3 total = Vec3::Zero();
  for (int j = 0; j < skel.joint_count(); ++j) {
    const LinkKin& k = kin_[j];
    // h about the link origin, then shifted to the world origin
    Vec6 h_body = model_.links[j].inertia * k.v;
    Vec3 n = k.rot_world * Vec3(h_body.head<3>());
    Vec3 p = k.rot_world * Vec3(h_body.tail<3>());
    total += n + k.pos_world.cross(p);
  }
  return total;
}

double Simulator::kinetic_energy() const { return phys::kinetic_energy(model_, kin_); }

double Simulator::max_penetration() const {
  double worst = 0.0;
  for (const ContactSphere& s : spheres_) {
    const LinkKin& k = kin_[s.joint];
    Vec3 center = k.pos_world + k.rot_world * s.offset;
    worst = std::max(worst, s.radius - center.z());
  }
  return worst;
}

RolloutResult simulate_rollout(const SkeletonSpec& skel, const motion::FrameState& initial,
                               const ActionProvider& provider, int horizon,
                               const SimConfig& config) {
  if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
  Simulator sim(skel, config);
  sim.set_state(initial);
  RolloutResult result;
  result.states.reserve(static_cast<std::size_t>(horizon) + 1);
  result.states.push_back(sim.state());
  for (int t = 0; t < horizon; ++t) {
    try {
      sim.control_step(provider(result.states.back(), t));
    } catch (const SimBlowupError& err) {
      result.truncated = true;
      result.blowup_message = err.what();
      break;
    }
    result.states.push_back(sim.state());
    ++result.steps_completed;
  }
  return result;
}

}  // namespace poseloop::phys
