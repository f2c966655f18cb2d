#include "poseloop/phys/model.hpp"

#include "poseloop/common/error.hpp"

namespace poseloop::phys {

PhysModel PhysModel::build(const SkeletonSpec& skel) {
  PhysModel model;
  model.skel = &skel;
  model.root = skel.root_index;
  model.nv = 6 + skel.non_root_dof();
  model.links.resize(skel.joint_count());

  for (int j = 0; j < skel.joint_count(); ++j) {
    const motion::JointSpec& spec = skel.joints[j];
    LinkModel& link = model.links[j];
    link.parent = spec.parent;
    link.offset = spec.offset;
    link.inertia = spatial_inertia(spec.link_mass, spec.com_offset, spec.link_inertia);
    link.s.setZero();
    if (j == skel.root_index) {
      link.nd = 6;
      link.voff = 0;
      link.s.setIdentity();
      link.offset = Vec3::Zero();  // root pose comes from the state, not the rig
    } else if (spec.dof == motion::DofKind::ball) {
      link.nd = 3;
      link.voff = 6 + skel.angle_offset(j);
      link.s.topLeftCorner<3, 3>().setIdentity();
    } else {
      link.nd = 1;
      link.voff = 6 + skel.angle_offset(j);
      link.s.col(0).head<3>() = spec.axis;
    }
  }

  std::vector<int> stack = {model.root};
  while (!stack.empty()) {
    int j = stack.back();
    stack.pop_back();
    model.order.push_back(j);
    for (int c = skel.joint_count() - 1; c >= 0; --c)
      if (c != skel.root_index && skel.joints[c].parent == j) stack.push_back(c);
  }
  if (static_cast<int>(model.order.size()) != skel.joint_count())
    throw DataError("skeleton is not a connected tree");
  return model;
}

void compute_link_kinematics(const PhysModel& model, const ReducedFrame& pose,
                             const Eigen::VectorXd& vel, bool root_fixed,
                             std::vector<LinkKin>& out) {
  const SkeletonSpec& skel = *model.skel;
  out.resize(model.links.size());

  for (int j : model.order) {
    const LinkModel& link = model.links[j];
    LinkKin& kin = out[j];
    if (j == model.root) {
      Mat3 rot = pose.root_rot.toRotationMatrix();
      kin.rot_world = rot;
      kin.pos_world = pose.root_pos;
      kin.to_body = Xform{rot.transpose(), pose.root_pos};
      kin.v = root_fixed ? Vec6::Zero() : Vec6(vel.head<6>());
      continue;
    }
    const LinkKin& par = out[link.parent];
    Quat joint_rot;
    int off = skel.angle_offset(j);
    if (skel.joints[j].dof == motion::DofKind::ball)
      joint_rot = motion::quat_exp(pose.angles.segment<3>(off));
    else
      joint_rot = Quat(Eigen::AngleAxisd(pose.angles[off], skel.joints[j].axis));

    Mat3 local = joint_rot.toRotationMatrix();
    kin.rot_world = par.rot_world * local;
    kin.pos_world = par.pos_world + par.rot_world * link.offset;
    kin.to_body = Xform{local.transpose(), link.offset};
    kin.v = kin.to_body.apply_motion(par.v) +
            link.s.leftCols(link.nd) * vel.segment(link.voff, link.nd);
  }
}

Vec3 linear_momentum(const PhysModel& model, const std::vector<LinkKin>& kin) {
  const SkeletonSpec& skel = *model.skel;
  Vec3 p = Vec3::Zero();
  for (int j = 0; j < skel.joint_count(); ++j) {
    const LinkKin& k = kin[j];
    Vec3 w_world = k.rot_world * Vec3(k.v.head<3>());
    Vec3 v_origin = k.rot_world * Vec3(k.v.tail<3>());
    Vec3 com_arm = k.rot_world * skel.joints[j].com_offset;
    p += skel.joints[j].link_mass * (v_origin + w_world.cross(com_arm));
  }
  return p;
}

double kinetic_energy(const PhysModel& model, const std::vector<LinkKin>& kin) {
  double e = 0.0;
  for (std::size_t j = 0; j < model.links.size(); ++j)
    e += 0.5 * kin[j].v.dot(model.links[j].inertia * kin[j].v);
  return e;
}

}  // namespace poseloop::phys
