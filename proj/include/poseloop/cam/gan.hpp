#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "poseloop/cam/camera.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/neural/adam.hpp"
#include "poseloop/neural/layers.hpp"

namespace poseloop::cam {

using motion::SkeletonSpec;
using neural::Mat;

struct CameraGanConfig {
  CameraSamplerConfig ranges;
  int noise_dim = 8;
  int hidden = 32;         // generator hidden width
  int disc_channels = 16;  // discriminator conv channels
  int disc_window = 8;     // frames per discriminator window
  double gen_lr = 1e-3;
  double disc_lr = 1e-3;
  int steps = 300;
  int batch = 16;  // windows per class per step
  int log_every = 50;
};

struct CameraGanStats {
  int step = 0;
  double disc_loss = 0.0;
  double gen_loss = 0.0;
  double disc_accuracy = 0.0;  // on the step's own batch
};

// Adversarial viewpoint sampler. The generator maps (8-dim noise, motion
// summary) through two dense layers to range-squashed placement parameters
// (height, distance, azimuth); the discriminator is a small temporal conv
// over 2D pose windows. Generator gradients flow through the projection by
// central finite differences on the three placement scalars.
class CameraGan {
 public:
  CameraGan(const SkeletonSpec& skel, const CameraGanConfig& config, std::uint64_t seed);

  // Range-squashed camera aimed at the motion's mean root. Deterministic
  // per seed; thread-safe with immutable params.
  Camera sample(const motion::MotionSequence3D& motion, std::uint64_t seed) const;

  // Alternating non-saturating updates: discriminator on real vs projected
  // windows, then generator against the updated discriminator.
  std::vector<CameraGanStats> train(const std::vector<motion::Pose2DSequence>& real2d,
                                    const std::vector<motion::MotionSequence3D>& motions,
                                    std::uint64_t seed);

  // Held-out discriminator accuracy on `n` fresh windows per class.
  double disc_accuracy(const std::vector<motion::Pose2DSequence>& real2d,
                       const std::vector<motion::MotionSequence3D>& motions, std::uint64_t seed,
                       int n = 200) const;

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

  const CameraGanConfig& config() const { return config_; }

  // Mean + population std of heading-local root-relative joint positions.
  Eigen::VectorXd summarize(const motion::MotionSequence3D& motion) const;

 private:
  Eigen::Vector3d placement(const Eigen::VectorXd& summary, Rng& rng) const;
  double disc_logit_infer(const Mat& window) const;

  SkeletonSpec skel_;
  CameraGanConfig config_;
  int joints_;

  neural::ParamStore gen_store_;
  std::unique_ptr<neural::Dense> g1_, g2_;
  neural::ParamStore disc_store_;
  std::unique_ptr<neural::Conv1d> d1_, d2_;
  std::unique_ptr<neural::Dense> dhead_;
};

// Draws from the GAN with probability mix_ratio, otherwise from the uniform
// sampler; both stay inside the config ranges. A null GAN is always uniform.
Camera sample_camera_mixed(const CameraGan* gan, const CameraSamplerConfig& config,
                           const motion::MotionSequence3D& motion, double mix_ratio,
                           std::uint64_t seed);

}  // namespace poseloop::cam
