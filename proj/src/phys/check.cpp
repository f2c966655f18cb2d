#include "poseloop/phys/check.hpp"

namespace poseloop::phys {

Eigen::MatrixXd mass_matrix(const PhysModel& model, const ReducedFrame& pose) {
  std::vector<LinkKin> kin;
  Eigen::VectorXd zero_vel = Eigen::VectorXd::Zero(model.nv);
  compute_link_kinematics(model, pose, zero_vel, false, kin);

  std::vector<Mat66> composite(model.links.size());
  for (std::size_t j = 0; j < model.links.size(); ++j) composite[j] = model.links[j].inertia;

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(model.nv, model.nv);
  for (auto it = model.order.rbegin(); it != model.order.rend(); ++it) {
    int j = *it;
    const LinkModel& link = model.links[j];
    if (j != model.root) {
      Mat66 x = kin[j].to_body.motion_matrix();
      composite[link.parent] += x.transpose() * composite[j] * x;
    }
    Eigen::MatrixXd f = composite[j] * link.s.leftCols(link.nd);
    m.block(link.voff, link.voff, link.nd, link.nd) =
        link.s.leftCols(link.nd).transpose() * f;
    int k = j;
    while (k != model.root) {
      // transport j's composite force columns into the parent frame
      Eigen::MatrixXd f_up(6, f.cols());
      for (int c = 0; c < f.cols(); ++c) f_up.col(c) = kin[k].to_body.transpose_force(f.col(c));
      f = f_up;
      k = model.links[k].parent;
      const LinkModel& anc = model.links[k];
      Eigen::MatrixXd block = anc.s.leftCols(anc.nd).transpose() * f;
      m.block(anc.voff, link.voff, anc.nd, link.nd) = block;
      m.block(link.voff, anc.voff, link.nd, anc.nd) = block.transpose();
    }
  }
  return m;
}

Eigen::VectorXd bias_forces(const PhysModel& model, const ReducedFrame& pose,
                            const Eigen::VectorXd& vel, double gravity,
                            const std::vector<Vec6>& ext_world) {
  std::vector<LinkKin> kin;
  compute_link_kinematics(model, pose, vel, false, kin);

  std::vector<Vec6> acc(model.links.size());
  std::vector<Vec6> force(model.links.size());
  for (int j : model.order) {
    const LinkModel& link = model.links[j];
    const LinkKin& k = kin[j];
    if (j == model.root) {
      Vec6 a_world = Vec6::Zero();
      a_world[5] = gravity;  // upward base acceleration stands in for gravity
      acc[j] = k.to_body.apply_motion(a_world);
    } else {
      Vec6 vj = link.s.leftCols(link.nd) * vel.segment(link.voff, link.nd);
      acc[j] = k.to_body.apply_motion(acc[link.parent]) + crm(k.v, vj);
    }
    Vec6 f_body;
    f_body.head<3>() = k.rot_world.transpose() * ext_world[j].head<3>();
    f_body.tail<3>() = k.rot_world.transpose() * ext_world[j].tail<3>();
    force[j] = link.inertia * acc[j] + crf(k.v, link.inertia * k.v) - f_body;
  }

  Eigen::VectorXd bias(model.nv);
  for (auto it = model.order.rbegin(); it != model.order.rend(); ++it) {
    int j = *it;
    const LinkModel& link = model.links[j];
    bias.segment(link.voff, link.nd) = link.s.leftCols(link.nd).transpose() * force[j];
    if (j != model.root) force[link.parent] += kin[j].to_body.transpose_force(force[j]);
  }
  return bias;
}

}  // namespace poseloop::phys
