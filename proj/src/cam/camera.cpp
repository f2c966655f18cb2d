#include "poseloop/cam/camera.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "poseloop/common/error.hpp"

namespace poseloop::cam {

namespace {
constexpr double kMinDepth = 0.05;  // m
}

Eigen::Vector2d Camera::project_point(const Vec3& world) const {
  Vec3 c = to_camera(world);
  if (c.z() < kMinDepth)
    throw DataError("point at depth " + std::to_string(c.z()) +
                    " m is behind the camera");
  return {focal * c.x() / c.z(), focal * c.y() / c.z()};
}

Camera look_at_camera(const Vec3& position, const Vec3& target, double focal) {
  Vec3 forward = target - position;
  if (forward.norm() < 1e-9) throw DataError("camera target coincides with its center");
  forward.normalize();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-6) right = Vec3::UnitX();  // looking straight up/down
  right.normalize();
  Vec3 down = forward.cross(right);
  motion::Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  Camera cam;
  cam.position = position;
  cam.orientation = Quat(r).normalized();
  cam.focal = focal;
  return cam;
}

Pose2DSequence project_motion(const Camera& camera, const MotionSequence3D& motion) {
  Pose2DSequence out;
  out.fps = motion.fps;
  out.frames.reserve(motion.frames.size());
  for (const auto& frame : motion.frames) {
    Eigen::MatrixXd f(frame.rows(), 2);
    for (Eigen::Index j = 0; j < frame.rows(); ++j)
      f.row(j) = camera.project_point(frame.row(j).transpose()).transpose();
    out.frames.push_back(std::move(f));
  }
  return out;
}

MotionSequence3D to_camera_frame(const Camera& camera, const MotionSequence3D& motion) {
  MotionSequence3D out = motion;
  for (auto& frame : out.frames)
    for (Eigen::Index j = 0; j < frame.rows(); ++j)
      frame.row(j) = camera.to_camera(frame.row(j).transpose()).transpose();
  return out;
}

MotionSequence3D to_world_frame(const Camera& camera, const MotionSequence3D& motion) {
  MotionSequence3D out = motion;
  for (auto& frame : out.frames)
    for (Eigen::Index j = 0; j < frame.rows(); ++j)
      frame.row(j) = camera.to_world(frame.row(j).transpose()).transpose();
  return out;
}

void validate_sampler_config(const CameraSamplerConfig& c) {
  if (c.height_lo > c.height_hi || c.distance_lo > c.distance_hi ||
      c.azimuth_lo > c.azimuth_hi || c.elevation_lo > c.elevation_hi) {
    throw ConfigError("camera sampler: empty range");
  }
  if (c.distance_lo <= 0.0) throw ConfigError("camera sampler: minimum distance must be > 0");
}

Vec3 mean_root_position(const MotionSequence3D& motion, int root_joint) {
  if (motion.length() == 0) throw DataError("cannot aim a camera at an empty motion");
  Vec3 target = Vec3::Zero();
  for (const auto& frame : motion.frames) target += frame.row(root_joint).transpose();
  return target / motion.length();
}

Camera place_aimed_camera(const CameraSamplerConfig& config, double height, double distance,
                          double azimuth, const Vec3& target) {
  const double elevation = std::atan2(height - target.z(), distance);
  const double bounded = std::clamp(elevation, config.elevation_lo, config.elevation_hi);
  if (bounded != elevation) {
    height = std::clamp(target.z() + distance * std::tan(bounded), config.height_lo,
                        config.height_hi);
  }
  const Vec3 position(target.x() + distance * std::cos(azimuth),
                      target.y() + distance * std::sin(azimuth), height);
  return look_at_camera(position, target);
}

Camera sample_random_camera(const CameraSamplerConfig& config, const MotionSequence3D& motion,
                            std::uint64_t seed, int root_joint) {
  validate_sampler_config(config);
  const Vec3 target = mean_root_position(motion, root_joint);
  Rng rng(seed);
  const double azimuth = rng.uniform(config.azimuth_lo, config.azimuth_hi);
  const double distance = rng.uniform(config.distance_lo, config.distance_hi);
  const double height = rng.uniform(config.height_lo, config.height_hi);
  return place_aimed_camera(config, height, distance, azimuth, target);
}

Camera sample_camera_heuristic(Rng& rng, const MotionSequence3D& motion, int root_joint) {
  return sample_random_camera(CameraSamplerConfig{}, motion, rng.next_u64(), root_joint);
}

nlohmann::json camera_to_json(const Camera& camera) {
  return {{"position", {camera.position.x(), camera.position.y(), camera.position.z()}},
          {"orientation_wxyz",
           {camera.orientation.w(), camera.orientation.x(), camera.orientation.y(),
            camera.orientation.z()}},
          {"focal", camera.focal}};
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  try {
    const auto& p = j.at("position");
    cam.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    const auto& q = j.at("orientation_wxyz");
    cam.orientation = Quat(q.at(0).get<double>(), q.at(1).get<double>(),
                           q.at(2).get<double>(), q.at(3).get<double>())
                          .normalized();
    cam.focal = j.at("focal").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed camera JSON: " + std::string(e.what()));
  }
  return cam;
}

}  // namespace poseloop::cam
