#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "poseloop/cam/camera.hpp"
#include "poseloop/motion/types.hpp"
#include "poseloop/neural/adam.hpp"
#include "poseloop/neural/layers.hpp"

namespace poseloop::est {

using motion::MotionSequence3D;
using motion::Pose2DSequence;
using neural::Mat;

struct EstimatorConfig {
  int receptive_field = 27;  // odd, realized as kernel-3 stages with 3^i dilations
  int channels = 128;
  double lr = 3e-4;
  int steps = 600;
  int batch_windows = 8;    // windows per step
  int window_outputs = 8;   // supervised frames per window
  int log_every = 50;       // loss logging and divergence-guard granularity
};

// A projected training pair. X is world-frame; x = project(camera, X).
struct PairedSample {
  Pose2DSequence x;
  MotionSequence3D X;
  cam::Camera camera;
};

// Throws DataError unless x = project(camera, X) within 1e-9 and shapes match.
void validate_pair(const PairedSample& pair);

struct EstimatorLoss {
  double pose_mse = 0.0;  // m^2, mean squared joint error, root-relative
  double traj_l1 = 0.0;   // depth-weighted L1 on the root trajectory
};

struct EstimatorStepLoss {
  int step = 0;
  double pose_mse = 0.0;
  double traj_l1 = 0.0;
};

// Temporal-conv 2D->3D lifter with a root-relative pose branch and a root
// trajectory branch, both in camera coordinates. Output heads start at zero.
class Estimator {
 public:
  Estimator(int joints, const EstimatorConfig& config, std::uint64_t seed);

  // Replicate-pads (receptive_field-1)/2 frames per side, so output length
  // equals input length. Output stage is raw-estimate, camera coordinates.
  MotionSequence3D estimate(const Pose2DSequence& x) const;

  // Windowed Adam training; pose branch MSE, trajectory branch L1 weighted by
  // 1/max(depth, 1 m). Logs every log_every steps; a logged loss more than
  // 10x the previous one aborts with TrainError. Deterministic given seed.
  std::vector<EstimatorStepLoss> train(const std::vector<PairedSample>& pool,
                                       std::uint64_t seed);

  // Full-clip evaluation over every pair; no parameter change.
  EstimatorLoss evaluate_loss(const std::vector<PairedSample>& pool) const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

  int joints() const { return joints_; }
  const EstimatorConfig& config() const { return config_; }

 private:
  struct Trunk;  // forward caches for one window

  Mat run_trunk(const Mat& input2d) const;  // inference path, no caches
  Mat padded_input(const Pose2DSequence& x) const;

  int joints_;
  EstimatorConfig config_;
  int stages_ = 0;

  neural::ParamStore store_;
  std::vector<std::unique_ptr<neural::Conv1d>> convs_;
  std::unique_ptr<neural::Dense> pose_head_;  // channels -> (J-1)*3
  std::unique_ptr<neural::Dense> traj_head_;  // channels -> 3
};

}  // namespace poseloop::est
