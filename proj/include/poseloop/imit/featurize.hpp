#pragma once

#include "poseloop/motion/kinematics.hpp"
#include "poseloop/neural/layers.hpp"

namespace poseloop::imit {

using motion::FrameState;
using motion::ReducedPoseSequence;
using motion::SkeletonSpec;
using neural::Mat;

// Frozen random temporal projection of the reference window around t. The
// two valid convolutions consume the full 18-frame window ([t-9, t+8],
// edge-replicated) down to one feature column. Parameters are created in the
// policy store so checkpoints restore them, but nothing ever writes their
// gradients, so the optimizer leaves them at initialization.
class PhiEncoder {
 public:
  static constexpr int kPast = 9;
  static constexpr int kFuture = 8;
  static constexpr int kChannels = 64;

  PhiEncoder(neural::ParamStore& store, const std::string& prefix,
             const SkeletonSpec& skel, Rng& rng);

  int window() const { return kPast + 1 + kFuture; }
  int in_channels() const { return in_ch_; }

  // Feature column for one anchor frame; heading-local to frame t, so the
  // encoding depends on the reference clip alone.
  Eigen::VectorXd encode_frame(const SkeletonSpec& skel, const ReducedPoseSequence& ref,
                               int t) const;

  // kChannels x T cache of every anchor's encoding.
  Mat encode_clip(const SkeletonSpec& skel, const ReducedPoseSequence& ref) const;

 private:
  Mat window_input(const SkeletonSpec& skel, const ReducedPoseSequence& ref, int t) const;

  neural::Conv1d c1_, c2_;
  int in_ch_;
};

// Policy observation blocks. All heading-local; flat() feeds the nets.
struct ImitatorState {
  Eigen::VectorXd q;       // [root height, root tilt quat wxyz, joint angles]
  Eigen::VectorXd qdot;    // [root angular vel, root linear vel, dof rates]
  Eigen::VectorXd target;  // next-reference-frame differences vs the sim pose
  Eigen::VectorXd phi;     // encoded reference context

  Eigen::VectorXd flat() const;
};

int imitator_obs_dim(const SkeletonSpec& skel);

// Heading-local state featurization. The target block encodes reference
// frame min(t+1, T-1) relative to the sim pose: root offset in the sim
// heading frame, relative root rotation log, and per-joint chart differences
// (geodesic log for balls). phi_cache, when given, must be encode_clip's
// output for this reference. Throws DataError when t is out of range.
ImitatorState featurize_state(const SkeletonSpec& skel, const FrameState& sim,
                              const ReducedPoseSequence& reference, int t,
                              const PhiEncoder& encoder, const Mat* phi_cache = nullptr);

}  // namespace poseloop::imit
