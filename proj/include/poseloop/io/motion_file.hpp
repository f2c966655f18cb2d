#pragma once

#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "poseloop/motion/skeleton.hpp"
#include "poseloop/motion/types.hpp"

namespace poseloop::io {

using motion::MotionSequence3D;
using motion::Pose2DSequence;
using motion::ReducedPoseSequence;
using motion::SkeletonSpec;
using motion::StageTag;

// Motion files: 8-byte magic, u64 little-endian header length, JSON header
// (format version, skeleton id and checksum, fps, frame/joint counts,
// representation, stage tag), then the payload as little-endian f64 rows.
// Loads verify the header against the caller's skeleton and throw DataError
// with distinct messages for version, checksum, and truncation problems.

std::string skeleton_id(const SkeletonSpec& skel);

void save_motion_3d(const std::filesystem::path& path, const MotionSequence3D& motion,
                    const SkeletonSpec& skel);
MotionSequence3D load_motion_3d(const std::filesystem::path& path,
                                const SkeletonSpec& skel);

void save_motion_2d(const std::filesystem::path& path, const Pose2DSequence& poses,
                    const SkeletonSpec& skel,
                    StageTag stage = StageTag::ground_truth);
Pose2DSequence load_motion_2d(const std::filesystem::path& path,
                              const SkeletonSpec& skel);

void save_motion_reduced(const std::filesystem::path& path,
                         const ReducedPoseSequence& reduced, StageTag stage,
                         const SkeletonSpec& skel);
struct ReducedWithStage {
  ReducedPoseSequence sequence;
  StageTag stage = StageTag::ground_truth;
};
ReducedWithStage load_motion_reduced(const std::filesystem::path& path,
                                     const SkeletonSpec& skel);

// Header introspection without loading the payload.
nlohmann::json read_motion_header(const std::filesystem::path& path);

}  // namespace poseloop::io
