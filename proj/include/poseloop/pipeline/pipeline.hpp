#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "poseloop/cam/gan.hpp"
#include "poseloop/est/estimator.hpp"
#include "poseloop/hall/hallucinator.hpp"
#include "poseloop/imit/imitator.hpp"
#include "poseloop/motion/kinematics.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/motion/types.hpp"

namespace poseloop::pipeline {

using motion::MotionSequence3D;
using motion::Pose2DSequence;
using motion::ReducedPoseSequence;
using motion::SkeletonSpec;

struct PipelineConfig {
  // Total rounds including round 0, the bootstrap. Default 3 runs bootstrap
  // plus co-evolution rounds 1 and 2.
  int rounds = 3;
  int bootstrap_clips = 40;
  double bootstrap_seconds = 10.0;
  int hallucinated_clips = 20;   // per round once hallucination is active
  int hallucinated_frames = 120;
  int cameras_per_motion = 4;
  // Probability that a pair's camera comes from the uniform sampler rather
  // than the adversarial one; 1.0 disables the GAN entirely.
  double camera_mix_ratio = 0.5;
  double bootstrap_retain = 0.10;  // fraction of bootstrap pairs kept each round
  bool reset_imitator = false;     // true: fresh imitator parameters per round
  // The hallucinator trains from round 1 so consecutive checkpoints can be
  // compared, but its clips only enter the data pool from round 2.
  int hallucinate_from_round = 2;
  std::uint64_t master_seed = 1234;

  est::EstimatorConfig estimator;
  imit::ImitatorConfig imitator;
  hall::HallucinatorConfig hallucinator;
  cam::CameraSamplerConfig camera;
  cam::CameraGanConfig camera_gan;
};

void validate_pipeline_config(const PipelineConfig& config);

// Per-round measurements. Doubles are NaN until measured; counters are -1.
struct EvalRecord {
  int round = -1;
  double holdout_mpjpe_mm = std::nan("");  // root-aligned, camera frame
  int imitate_terminations = -1;           // restarts while imitating this round's refs
  int ref_terminations = -1;               // this round's imitator on the fixed ref pool
  double hall_mpjpe_mm = std::nan("");     // held-out in-betweening
  double hall_lerp_mpjpe_mm = std::nan("");
  double hall_win_rate = std::nan("");     // fraction of gaps beating interpolation
};

struct RoundState {
  int round = -1;  // last completed round; 0 means bootstrap done
  std::string estimator_ckpt;  // paths relative to the run directory
  std::string imitator_ckpt;
  std::string hallucinator_ckpt;  // empty until trained
  std::string camera_gan_ckpt;    // empty unless trained
  std::vector<est::PairedSample> bootstrap_pairs;
  std::vector<est::PairedSample> current_pairs;
  std::vector<EvalRecord> history;
};

// Hold-out clip with its true camera; used for evaluation only and never for
// training.
struct HoldoutClip {
  Pose2DSequence obs;
  MotionSequence3D gt;
  cam::Camera camera;
};

// Synthetic gliding-root references for the trajectory-following stage:
// rest pose, constant speed in [0.5, 1.5] m/s, heading random-walk bounded by
// 45 deg/s. Deterministic per seed.
std::vector<ReducedPoseSequence> make_bootstrap_references(const SkeletonSpec& skel,
                                                           const PipelineConfig& config,
                                                           std::uint64_t seed);

// Camera-frame estimate -> world candidate: rotates the clip's mean body-up
// axis onto +z, retargets every bone to the skeleton's exact length, then
// drops the 5th-percentile foot height onto the ground plane. The stage tag
// is preserved.
MotionSequence3D to_world_estimate(const SkeletonSpec& skel, const MotionSequence3D& estimate);

// Projects each motion with `cameras_per_motion` cameras drawn from the
// GAN/uniform mixture (`random_ratio` is the uniform-sampler probability;
// a null GAN makes every draw uniform). Motions must carry an imitated or
// refined stage tag; anything else is rejected as unrefined.
std::vector<est::PairedSample> build_pairs(const std::vector<MotionSequence3D>& motions,
                                           const cam::CameraGan* gan,
                                           const cam::CameraSamplerConfig& ranges,
                                           int cameras_per_motion, double random_ratio,
                                           std::uint64_t seed);

// Linear in-betweening baseline: anchors verbatim, interiors by component
// lerp of root position and joint angles and slerp of root rotation.
ReducedPoseSequence lerp_inbetween(const SkeletonSpec& skel, const hall::KeyframeSet& keys);

// Root-aligned MPJPE (mm) of the estimator on hold-out clips, evaluated in
// each clip's true camera frame.
double estimator_holdout_mpjpe(const est::Estimator& estimator,
                               const std::vector<HoldoutClip>& holdout);

struct InbetweenEval {
  double mpjpe_mm = 0.0;       // hallucinated interiors vs ground truth
  double lerp_mpjpe_mm = 0.0;  // interpolation baseline on the same gaps
  double win_rate = 0.0;       // fraction of gaps where the hallucinator wins
  int gaps = 0;
};

// Within-clip keyframes on each hold-out reduced clip, hallucinated and
// compared to ground truth through FK.
InbetweenEval eval_inbetweening(const hall::Hallucinator& hallucinator,
                                const std::vector<ReducedPoseSequence>& holdout_reduced);

// The dual-loop driver. All artifacts live under run_dir; state.json tracks
// the last completed round and is snapshotted per round for resume.
class Pipeline {
 public:
  Pipeline(const SkeletonSpec& skel, const PipelineConfig& config,
           const std::filesystem::path& run_dir);

  // Round 0: trains the trajectory-following imitator on random references,
  // rolls it out, projects with uniform cameras, trains the round-0 estimator.
  RoundState bootstrap();

  // Round state.round + 1: estimate -> world -> IK -> imitator train/imitate
  // -> (from hallucinate_from_round) hallucinate + re-imitate -> build pairs
  // -> estimator retraining. Persists artifacts and the state snapshot.
  RoundState run_round(const RoundState& state, const std::vector<Pose2DSequence>& pool2d);

  // Bootstrap (or resume) plus every remaining round. When holdout is given,
  // eval records are appended per round; hold-out data never enters training.
  RoundState run_full(const std::vector<Pose2DSequence>& pool2d,
                      const std::vector<HoldoutClip>* holdout = nullptr);

  // Loads the latest state; round_index >= 0 loads that round's snapshot.
  RoundState resume(int round_index = -1);

  const est::Estimator& estimator() const;
  const imit::Imitator& imitator() const;
  const hall::Hallucinator& hallucinator() const;
  bool has_hallucinator() const { return hall_ != nullptr; }

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

  // Fixed measurement pool (round-1 references) used for the termination
  // trend; loaded lazily on resume.
  const std::vector<ReducedPoseSequence>& fixed_references() const { return fixed_refs_; }

 private:
  void ensure_modules();
  void load_modules(const RoundState& state);
  RoundState load_state_file(const std::filesystem::path& path) const;
  void persist_state(const RoundState& state, const std::filesystem::path& snapshot_dir);
  std::vector<ReducedPoseSequence> imitated_reduced(
      const std::vector<MotionSequence3D>& motions) const;

  SkeletonSpec skel_;
  PipelineConfig config_;
  std::filesystem::path run_dir_;

  std::unique_ptr<est::Estimator> est_;
  std::unique_ptr<imit::Imitator> imit_;
  std::unique_ptr<hall::Hallucinator> hall_;
  std::unique_ptr<cam::CameraGan> gan_;
  std::vector<ReducedPoseSequence> fixed_refs_;
};

}  // namespace poseloop::pipeline
