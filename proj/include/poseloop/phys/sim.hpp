#pragma once

#include <functional>
#include <string>
#include <vector>

#include "poseloop/phys/model.hpp"

namespace poseloop::phys {

struct SimConfig {
  double gravity = 9.81;            // m/s^2, along -z
  double control_fps = 30.0;
  int substeps = 15;                // 450 Hz integration
  double contact_stiffness = 3e4;   // N/m
  double contact_damping = 1e3;     // N*s/m, normal and tangential
  double friction_mu = 0.9;        // Coulomb cap on tangential force
  double residual_force_max = 200.0;   // N per axis, root assist bound
  double residual_torque_max = 100.0;  // N*m per axis
  bool root_fixed = false;          // weld the root to the world (test rigs)
  bool contacts_enabled = true;
  double velocity_blowup = 1e4;     // any |rate| beyond this aborts the episode

  double substep_dt() const { return 1.0 / (control_fps * substeps); }
};

// One control-step command: PD targets for every non-root dof plus the
// residual root wrench. Targets are clamped to joint limits and the wrench to
// the configured bounds inside the step.
struct Action {
  Eigen::VectorXd pd_targets;
  Vec3 residual_force = Vec3::Zero();
  Vec3 residual_torque = Vec3::Zero();
};

// Penalty-contact sphere rigidly attached to a link.
struct ContactSphere {
  int joint = 0;
  Vec3 offset = Vec3::Zero();  // in the joint frame
  double radius = 0.0;
};

// Spheres for the default humanoid: heel/toe per foot plus pelvis, head,
// hands, knees, and elbows. Joints are looked up by name; absent names are
// skipped, so unrelated rigs get an empty set.
std::vector<ContactSphere> default_contact_spheres(const SkeletonSpec& skel);

// Plain per-dof PD law: tau = kp*(u - q) - kd*qdot, gains broadcast over each
// joint's dofs. Ball-joint targets and angles live in the rotation-vector
// chart, so the difference is the chart error, not the geodesic one.
Eigen::VectorXd pd_torque(const SkeletonSpec& skel, const Eigen::VectorXd& q_joint,
                          const Eigen::VectorXd& qdot_joint, const Eigen::VectorXd& u_nr);

// Articulated-body forward dynamics with semi-implicit Euler integration in
// reduced coordinates. Ball joints integrate on the quaternion manifold.
class Simulator {
 public:
  Simulator(const SkeletonSpec& skel, const SimConfig& config);

  void set_state(const motion::FrameState& state);
  motion::FrameState state() const;
  double time() const { return time_; }

  // Advances one control step (= substeps integrator ticks) under a fixed
  // action. Throws SimBlowupError when the state diverges.
  void control_step(const Action& action);

  // Single integrator tick with explicit joint torques (diagnostics surface).
  void substep(const Eigen::VectorXd& joint_torques, const Vec3& residual_force,
               const Vec3& residual_torque);

  const SkeletonSpec& skeleton() const { return *model_.skel; }
  const SimConfig& config() const { return config_; }
  const PhysModel& model() const { return model_; }

  std::vector<ContactSphere>& contact_spheres() { return spheres_; }
  const std::vector<ContactSphere>& contact_spheres() const { return spheres_; }

  Vec3 linear_momentum() const;
  Vec3 angular_momentum() const;  // about the world origin
  double kinetic_energy() const;
  // Deepest current sphere penetration into the ground plane, in meters.
  double max_penetration() const;

 private:
  void refresh_kinematics();
  void accumulate_contact_forces(std::vector<Vec6>& ext_world) const;
  // damping_h: per-dof kd*dt folded implicitly into the joint impedance, so
  // stiff PD dampers on light links stay stable at the fixed step size.
  void forward_dynamics(const Eigen::VectorXd& joint_torques,
                        const std::vector<Vec6>& ext_world, const Eigen::VectorXd& damping_h,
                        Eigen::VectorXd& qdd);
  void step_internal(const Eigen::VectorXd& joint_torques, const Vec3& residual_force,
                     const Vec3& residual_torque, const Eigen::VectorXd& damping_h);
  void integrate(const Eigen::VectorXd& qdd, double h);
  void check_health();

  PhysModel model_;
  SimConfig config_;
  std::vector<ContactSphere> spheres_;

  ReducedFrame pose_;
  Eigen::VectorXd vel_;  // [root w_body, root v_body, joint rates]
  std::vector<LinkKin> kin_;  // always in sync with pose_/vel_
  double time_ = 0.0;

  // articulated-body scratch
  std::vector<Mat66> ia_;
  std::vector<Vec6> pa_, bias_, acc_;
  std::vector<Mat66> u_;     // I^A S in the first nd columns
  std::vector<Mat66> dinv_;  // (S^T I^A S)^-1 in the top-left nd block
  std::vector<Vec6> ujnt_;   // tau - S^T p^A in the first nd entries
};

struct RolloutResult {
  std::vector<motion::FrameState> states;  // initial state plus one per step
  bool truncated = false;                  // stopped early on blowup
  std::string blowup_message;
  int steps_completed = 0;
};

using ActionProvider = std::function<Action(const motion::FrameState&, int)>;

// Runs `horizon` control steps, recording the state after each. A blowup
// truncates the trajectory instead of propagating.
RolloutResult simulate_rollout(const SkeletonSpec& skel, const motion::FrameState& initial,
                               const ActionProvider& provider, int horizon,
                               const SimConfig& config);

}  // namespace poseloop::phys
