#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

namespace poseloop::motion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rotation vector (axis * angle) -> unit quaternion.
inline Quat quat_exp(const Vec3& rv) {
  double angle = rv.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z());
    q.normalize();
    return q;
  }
  double half = 0.5 * angle;
  Vec3 axis = rv / angle;
  double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

// Unit quaternion -> rotation vector with angle in [0, pi].
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  double vn = q.vec().norm();
  if (vn < 1e-12) return 2.0 * q.vec();
  double angle = 2.0 * std::atan2(vn, q.w());
  return (angle / vn) * q.vec();
}

// Geodesic angle between two rotations, in [0, pi]. The atan2 form stays
// accurate for tiny angles where acos of the dot product loses precision.
inline double quat_angle(const Quat& a, const Quat& b) {
  Quat d = a.conjugate() * b;
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

inline Quat yaw_quat(double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

// Yaw of a rotation: heading of the rotated +x axis is not robust when x
// points near vertical, so extract yaw from the full rotation's projection:
// the yaw that best aligns Rz(yaw) with R on the ground plane.
inline double rotation_yaw(const Quat& q) {
  Mat3 r = q.toRotationMatrix();
  // atan2 over the planar part of column x plus column y gives the polar
  // decomposition yaw for the 2x2 upper-left block.
  double s = r(1, 0) - r(0, 1);
  double c = r(0, 0) + r(1, 1);
  if (std::abs(s) < 1e-15 && std::abs(c) < 1e-15) return 0.0;
  return std::atan2(s, c);
}

// Minimal rotation taking unit vector `from` to unit vector `to`.
inline Quat rotation_between(const Vec3& from, const Vec3& to) {
  return Quat::FromTwoVectors(from, to);
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace poseloop::motion
