#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "poseloop/motion/kinematics.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/motion/types.hpp"
#include "poseloop/neural/adam.hpp"
#include "poseloop/neural/layers.hpp"

namespace poseloop::hall {

using motion::MotionSequence3D;
using motion::ReducedFrame;
using motion::ReducedPoseSequence;
using motion::SkeletonSpec;
using neural::Mat;

struct HallucinatorConfig {
  int k = 15;             // keyframe interval, frames
  double gen_lr = 1e-4;
  double disc_lr = 1e-5;
  double adv_weight = 0.01;  // 0 disables the discriminator entirely
  int bptt_window = 16;      // max steps gradients flow back within a gap
  int hidden = 128;          // GRU width
  int disc_channels = 32;
  int disc_window = 8;  // frames per discriminator window
  double v_max = 1.5;   // m/s, bounds cross-clip anchor spacing
  int steps = 500;
  int batch = 8;  // gaps per training step
  int log_every = 50;
};

void validate_hallucinator_config(const HallucinatorConfig& config);

struct Keyframe {
  int index = 0;
  ReducedFrame pose;
};

// Ordered anchors covering [0, last index]; gaps at most k frames.
struct KeyframeSet {
  std::vector<Keyframe> anchors;
  double fps = 30.0;
};

// Throws DataError unless indices start at 0, strictly increase with gaps
// <= k, and every pose matches the skeleton layout.
void validate_keyframes(const SkeletonSpec& skel, const KeyframeSet& keys, int k);

enum class KeyframeMode { within_clip, cross_clip };

// within_clip: every k-th frame of one pool clip, verbatim (training).
// cross_clip: successive anchors from different clips, heading-aligned and
// root-stitched so consecutive roots stay within 1.5 * k/fps * v_max
// horizontally (inference). Deterministic per seed.
KeyframeSet sample_keyframes(const SkeletonSpec& skel, const HallucinatorConfig& config,
                             const std::vector<ReducedPoseSequence>& pool, int target_length,
                             KeyframeMode mode, std::uint64_t seed);

struct HallucinatorStats {
  int step = 0;
  double recon = 0.0;      // mean squared encoding error over the batch
  double gen_adv = 0.0;    // generator adversarial loss (0 when adv_weight 0)
  double disc_loss = 0.0;  // discriminator BCE (0 when adv_weight 0)
  double disc_accuracy = 0.0;
};

// Recurrent in-betweener over reduced coordinates. The generator is a GRU
// fed (previous frame, next anchor, frames-to-go), all frames encoded local
// to the gap's opening anchor; a temporal conv discriminator slides over
// 8-frame windows of the same encoding. FK of the output guarantees
// constant bone lengths.
class Hallucinator {
 public:
  Hallucinator(const SkeletonSpec& skel, const HallucinatorConfig& config, std::uint64_t seed);

  // Alternating updates: discriminator on real vs free-running generated
  // windows, then generator on L2 reconstruction + non-saturating
  // adversarial loss. adv_weight 0 skips every discriminator code path.
  std::vector<HallucinatorStats> train(const std::vector<ReducedPoseSequence>& pool,
                                       std::uint64_t seed);

  // Anchors are copied verbatim; intermediates are generated gap by gap.
  ReducedPoseSequence hallucinate_reduced(const KeyframeSet& keys) const;
  MotionSequence3D hallucinate(const KeyframeSet& keys) const;  // FK, stage hallucinated

  // Held-out discriminator accuracy: windows of `real` against windows of
  // `other`, both through the anchor-local encoding.
  double disc_accuracy(const std::vector<ReducedPoseSequence>& real,
                       const std::vector<ReducedPoseSequence>& other, std::uint64_t seed,
                       int n = 200) const;

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

  const HallucinatorConfig& config() const { return config_; }
  const SkeletonSpec& skeleton() const { return skel_; }
  int encoding_dim() const { return enc_dim_; }

  // Gap-anchor chart: heading-local root displacement, root rotation log,
  // joint angles. decode_local inverts encode_local about the same anchor.
  Eigen::VectorXd encode_local(const ReducedFrame& anchor, const ReducedFrame& frame) const;
  ReducedFrame decode_local(const ReducedFrame& anchor, const Eigen::VectorXd& enc) const;

 private:
  struct GapRollout;  // forward pass bookkeeping for one gap

  GapRollout run_gap(const ReducedFrame& a, const Eigen::VectorXd& enc_b, int gap_len,
                     bool keep_caches) const;
  double disc_logit_infer(const Mat& window) const;
  Mat window_matrix(const ReducedPoseSequence& clip, int anchor, int start) const;

  SkeletonSpec skel_;
  HallucinatorConfig config_;
  int enc_dim_ = 0;

  neural::ParamStore gen_store_;
  std::unique_ptr<neural::GRUCell> gru_;
  neural::Param* out_w_ = nullptr;
  neural::Param* out_b_ = nullptr;

  neural::ParamStore disc_store_;
  std::unique_ptr<neural::Conv1d> d1_, d2_;
  std::unique_ptr<neural::Dense> dhead_;
};

}  // namespace poseloop::hall
