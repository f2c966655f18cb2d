#include "poseloop/motion/types.hpp"

#include "poseloop/common/error.hpp"

namespace poseloop::motion {

std::string stage_tag_name(StageTag tag) {
  switch (tag) {
    case StageTag::raw_estimate: return "raw-estimate";
    case StageTag::imitated: return "imitated";
    case StageTag::hallucinated: return "hallucinated";
    case StageTag::refined: return "refined";
    case StageTag::ground_truth: return "ground-truth";
  }
  return "unknown";
}

StageTag stage_tag_from_name(const std::string& name) {
  if (name == "raw-estimate") return StageTag::raw_estimate;
  if (name == "imitated") return StageTag::imitated;
  if (name == "hallucinated") return StageTag::hallucinated;
  if (name == "refined") return StageTag::refined;
  if (name == "ground-truth") return StageTag::ground_truth;
  throw DataError("unknown stage tag: " + name);
}

bool MotionSequence3D::all_finite() const {
  for (const auto& f : frames)
    if (!f.allFinite()) return false;
  return true;
}

bool Pose2DSequence::all_finite() const {
  for (const auto& f : frames)
    if (!f.allFinite()) return false;
  return true;
}

}  // namespace poseloop::motion
