#pragma once

#include <cmath>
#include <cstdint>

#include <nlohmann/json_fwd.hpp>

#include "poseloop/common/rng.hpp"
#include "poseloop/motion/types.hpp"

namespace poseloop::cam {

using motion::MotionSequence3D;
using motion::Pose2DSequence;
using motion::Quat;
using motion::Vec3;

// Pinhole camera with a normalized focal length and the principal point at
// the image origin. Camera frame: x right, y down, z forward.
struct Camera {
  Vec3 position = Vec3::Zero();       // camera center, world frame
  Quat orientation = Quat::Identity();  // camera-to-world rotation
  double focal = 1.0;

  Vec3 to_camera(const Vec3& world) const {
    return orientation.conjugate() * (world - position);
  }
  Vec3 to_world(const Vec3& camera) const { return orientation * camera + position; }

  // Throws DataError when the point sits behind or on the image plane.
  Eigen::Vector2d project_point(const Vec3& world) const;
};

// Camera at `position` with its optical axis through `target` and a
// horizontal image x axis.
Camera look_at_camera(const Vec3& position, const Vec3& target, double focal = 1.0);

Pose2DSequence project_motion(const Camera& camera, const MotionSequence3D& motion);
MotionSequence3D to_camera_frame(const Camera& camera, const MotionSequence3D& motion);
MotionSequence3D to_world_frame(const Camera& camera, const MotionSequence3D& motion);

// Viewpoint sampling ranges. Elevation is the angle from the aim target up
// to the camera (positive = camera above the target); it is realized by
// aiming at the subject, not by sampling pitch, so it acts as a constraint
// on the sampled height at the sampled distance.
struct CameraSamplerConfig {
  double height_lo = 1.2, height_hi = 2.0;      // camera z, m
  double distance_lo = 3.0, distance_hi = 6.0;  // horizontal distance, m
  double azimuth_lo = -M_PI, azimuth_hi = M_PI;
  double elevation_lo = -M_PI / 4, elevation_hi = M_PI / 4;
};

// Throws ConfigError on an empty range or a non-positive minimum distance.
void validate_sampler_config(const CameraSamplerConfig& config);

// Camera at the given placement aimed at `target`, with the height adjusted
// (then re-clamped to the height range) when the implied elevation falls
// outside the configured range.
Camera place_aimed_camera(const CameraSamplerConfig& config, double height, double distance,
                          double azimuth, const Vec3& target);

// Uniform random viewpoint aimed at the motion's mean root position (row
// `root_joint`). Deterministic per seed.
Camera sample_random_camera(const CameraSamplerConfig& config, const MotionSequence3D& motion,
                            std::uint64_t seed, int root_joint = 0);

// Mean root position over the clip; the aim target for sampled cameras.
Vec3 mean_root_position(const MotionSequence3D& motion, int root_joint = 0);

// Default-config random viewpoint: height 1.2-2.0 m, horizontal distance
// 3-6 m, azimuth over the full circle.
Camera sample_camera_heuristic(Rng& rng, const MotionSequence3D& motion, int root_joint);

nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);

}  // namespace poseloop::cam
