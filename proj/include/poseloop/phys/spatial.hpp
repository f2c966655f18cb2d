#pragma once

#include <Eigen/Dense>

#include "poseloop/motion/geometry.hpp"

namespace poseloop::phys {

using motion::Mat3;
using motion::Quat;
using motion::Vec3;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat66 = Eigen::Matrix<double, 6, 6>;

// Spatial vectors stack angular on top of linear: [w; v].

inline Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return m;
}

// Plucker transform from frame A to frame B, where B's origin sits at r (A
// coords) and E rotates A coordinates into B coordinates.
struct Xform {
  Mat3 e = Mat3::Identity();
  Vec3 r = Vec3::Zero();

  Vec6 apply_motion(const Vec6& v) const {
    Vec3 w = v.head<3>(), l = v.tail<3>();
    Vec6 out;
    out.head<3>() = e * w;
    out.tail<3>() = e * (l + w.cross(r));
    return out;
  }

  // Transpose action: maps a force in B coordinates back to A coordinates.
  Vec6 transpose_force(const Vec6& f) const {
    Vec3 n = f.head<3>(), l = f.tail<3>();
    Vec3 fl = e.transpose() * l;
    Vec6 out;
    out.head<3>() = e.transpose() * n + r.cross(fl);
    out.tail<3>() = fl;
    return out;
  }

  Mat66 motion_matrix() const {
    Mat66 m = Mat66::Zero();
    m.topLeftCorner<3, 3>() = e;
    m.bottomRightCorner<3, 3>() = e;
    m.bottomLeftCorner<3, 3>() = -e * skew(r);
    return m;
  }
};

// Motion cross product v x u.
inline Vec6 crm(const Vec6& v, const Vec6& u) {
  Vec3 w = v.head<3>(), l = v.tail<3>();
  Vec6 out;
  out.head<3>() = w.cross(Vec3(u.head<3>()));
  out.tail<3>() = w.cross(Vec3(u.tail<3>())) + l.cross(Vec3(u.head<3>()));
  return out;
}

// Force cross product v x* f.
inline Vec6 crf(const Vec6& v, const Vec6& f) {
  Vec3 w = v.head<3>(), l = v.tail<3>();
  Vec6 out;
  out.head<3>() = w.cross(Vec3(f.head<3>())) + l.cross(Vec3(f.tail<3>()));
  out.tail<3>() = w.cross(Vec3(f.tail<3>()));
  return out;
}

// Spatial inertia about the body-frame origin for a link with COM at c.
inline Mat66 spatial_inertia(double mass, const Vec3& c, const Mat3& inertia_com) {
  Mat66 out;
  Mat3 cx = skew(c);
  out.topLeftCorner<3, 3>() = inertia_com + mass * cx * cx.transpose();
  out.topRightCorner<3, 3>() = mass * cx;
  out.bottomLeftCorner<3, 3>() = mass * cx.transpose();
  out.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return out;
}

}  // namespace poseloop::phys
