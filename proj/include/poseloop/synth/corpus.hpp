#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "poseloop/cam/camera.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/motion/types.hpp"

namespace poseloop::synth {

using motion::MotionSequence3D;
using motion::Pose2DSequence;
using motion::SkeletonSpec;

enum class RecipeKind { walk, squat, reach, idle };

std::string_view kind_name(RecipeKind kind);
RecipeKind kind_from_name(std::string_view name);

struct SynthRecipe {
  RecipeKind kind = RecipeKind::walk;
  double duration = 4.0;   // seconds; walks are additionally capped by path length
  double speed = 1.0;      // m/s, walk only
  double turn_rate = 0.0;  // rad/s, walk only
};

struct SynthConfig {
  double fps = 30.0;
  int holdout_every = 4;         // every n-th clip goes to the hold-out split
  double max_path_length = 2.4;  // m; keeps walkers inside sampled view frusta
  cam::CameraSamplerConfig camera;
};

void validate_synth_config(const SynthConfig& config);

struct SynthClip {
  std::string name;
  SynthRecipe recipe;
  MotionSequence3D gt;  // ground truth, never exposed to the training pipeline
  cam::Camera camera;   // hidden alongside the ground truth
  Pose2DSequence obs;   // the only pipeline-visible signal
};

struct SynthCorpus {
  std::vector<SynthClip> train;
  std::vector<SynthClip> holdout;
};

// Round-robin over the four recipe kinds with randomized walk speeds and turn
// rates. Deterministic per seed.
std::vector<SynthRecipe> default_recipes(int clips, std::uint64_t seed);

// Kinematic synthesis in world coordinates. Bone lengths match the skeleton
// exactly on every frame; planted feet are pinned in world space so contact
// metrics read clean. Requires the default humanoid topology.
MotionSequence3D generate_recipe(const SkeletonSpec& skel, const SynthRecipe& recipe,
                                 double fps, double max_path_length, std::uint64_t seed);

SynthCorpus gen_synth_corpus(const SkeletonSpec& skel,
                             const std::vector<SynthRecipe>& recipes,
                             const SynthConfig& config, std::uint64_t seed);

// Fraction of frames whose joints all sit at depth > 0.1 m and project inside
// |u|, |v| <= half_extent.
double visibility_fraction(const cam::Camera& camera, const MotionSequence3D& motion,
                           double half_extent = 1.0);

// Layout under dir:
//   visible/<name>.p2d          training 2D observations, nothing else
//   hidden/<name>.p3d           ground-truth 3D for every clip
//   hidden/<name>.cam.json      the camera that produced the observations
//   hidden/<name>.p2d           hold-out 2D observations
//   manifest.json               clip names, splits, recipe metadata
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus,
                  const SkeletonSpec& skel);

// Reads only visible/, sorted by filename. This is the pipeline entry point.
std::vector<Pose2DSequence> read_visible(const std::filesystem::path& dir,
                                         const SkeletonSpec& skel);

// Reads everything back, including hidden ground truth. Evaluation only.
SynthCorpus read_corpus(const std::filesystem::path& dir, const SkeletonSpec& skel);

}  // namespace poseloop::synth
