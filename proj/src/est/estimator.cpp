#include "poseloop/est/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "poseloop/common/error.hpp"
#include "poseloop/neural/checkpoint.hpp"

namespace poseloop::est {

using motion::StageTag;

void validate_pair(const PairedSample& pair) {
  if (pair.x.length() != pair.X.length() || pair.x.joint_count() != pair.X.joint_count()) {
    throw DataError("paired sample: 2d/3d shape mismatch");
  }
  const Pose2DSequence reproj = cam::project_motion(pair.camera, pair.X);
  for (int t = 0; t < pair.x.length(); ++t) {
    const double err = (reproj.frames[t] - pair.x.frames[t]).lpNorm<Eigen::Infinity>();
    if (err > 1e-9) {
      throw DataError("paired sample: 2d is not the camera projection of the 3d (frame " +
                      std::to_string(t) + ", err " + std::to_string(err) + ")");
    }
  }
}

namespace {

int stage_count(int receptive_field) {
  if (receptive_field < 3 || receptive_field % 2 == 0) {
    throw ConfigError("receptive_field must be odd and >= 3");
  }
  int rf = 1, stages = 0;
  while (rf < receptive_field) {
    rf *= 3;
    ++stages;
  }
  if (rf != receptive_field) {
    throw ConfigError("receptive_field must be a power of 3 (kernel-3 dilated stages)");
  }
  return stages;
}

}  // namespace

Estimator::Estimator(int joints, const EstimatorConfig& config, std::uint64_t seed)
    : joints_(joints), config_(config) {
  if (joints < 2) throw ConfigError("estimator needs at least 2 joints");
  if (config.channels < 1 || config.lr <= 0) throw ConfigError("bad estimator config");
  stages_ = stage_count(config.receptive_field);
  store_.seed = seed;
  Rng rng(seed);

  int dilation = 1;
  int in_ch = 2 * joints;
  for (int s = 0; s < stages_; ++s) {
    convs_.push_back(std::make_unique<neural::Conv1d>(
        store_, "est.c" + std::to_string(s), in_ch, config.channels, 3, dilation, rng));
    in_ch = config.channels;
    dilation *= 3;
  }
  pose_head_ = std::make_unique<neural::Dense>(store_, "est.pose_head", config.channels,
                                               (joints - 1) * 3, rng);
  traj_head_ = std::make_unique<neural::Dense>(store_, "est.traj_head", config.channels, 3, rng);
  // Zero output heads: the untrained estimator predicts the all-root pose.
  store_.find("est.pose_head.w")->value.setZero();
  store_.find("est.pose_head.b")->value.setZero();
  store_.find("est.traj_head.w")->value.setZero();
  store_.find("est.traj_head.b")->value.setZero();
}

Mat Estimator::padded_input(const Pose2DSequence& x) const {
  if (x.joint_count() != joints_) {
    throw DataError("estimate: expected " + std::to_string(joints_) + " joints, got " +
                    std::to_string(x.joint_count()));
  }
  if (x.length() < 1) throw DataError("estimate: empty sequence");
  const int pad = (config_.receptive_field - 1) / 2;
  const int T = x.length();
  Mat input(2 * joints_, T + 2 * pad);
  for (int c = 0; c < T + 2 * pad; ++c) {
    const int t = std::clamp(c - pad, 0, T - 1);
    for (int j = 0; j < joints_; ++j) {
      input(2 * j, c) = x.frames[t](j, 0);
      input(2 * j + 1, c) = x.frames[t](j, 1);
    }
  }
  return input;
}

Mat Estimator::run_trunk(const Mat& input2d) const {
  Mat h = input2d;
  for (const auto& conv : convs_) h = conv->infer(h).cwiseMax(0.0);
  return h;
}

MotionSequence3D Estimator::estimate(const Pose2DSequence& x) const {
  const Mat h = run_trunk(padded_input(x));
  const Mat pose = pose_head_->infer(h);  // (J-1)*3 x T
  const Mat traj = traj_head_->infer(h);  // 3 x T

  MotionSequence3D out;
  out.fps = x.fps;
  out.stage = StageTag::raw_estimate;
  out.frames.resize(x.length());
  for (int t = 0; t < x.length(); ++t) {
    Eigen::MatrixXd f(joints_, 3);
    f.row(0) = traj.col(t).transpose();
    for (int j = 1; j < joints_; ++j) {
      f.row(j) = traj.col(t).transpose() + pose.col(t).segment<3>(3 * (j - 1)).transpose();
    }
    out.frames[t] = f;
  }
  return out;
}

namespace {

// Camera-frame targets for one pair: root trajectory and root-relative pose.
struct PairTargets {
  Mat traj;  // 3 x T
  Mat pose;  // (J-1)*3 x T
};

PairTargets camera_targets(const PairedSample& pair) {
  const MotionSequence3D xc = cam::to_camera_frame(pair.camera, pair.X);
  const int T = xc.length();
  const int J = xc.joint_count();
  PairTargets t;
  t.traj.resize(3, T);
  t.pose.resize(3 * (J - 1), T);
  for (int f = 0; f < T; ++f) {
    t.traj.col(f) = xc.frames[f].row(0).transpose();
    for (int j = 1; j < J; ++j) {
      t.pose.col(f).segment<3>(3 * (j - 1)) =
          (xc.frames[f].row(j) - xc.frames[f].row(0)).transpose();
    }
  }
  return t;
}

double depth_weight(double z) { return 1.0 / std::max(z, 1.0); }

}  // namespace

std::vector<EstimatorStepLoss> Estimator::train(const std::vector<PairedSample>& pool,
                                                std::uint64_t seed) {
  if (pool.empty()) throw DataError("estimator train: empty dataset");
  const int rf = config_.receptive_field;
  for (const auto& pair : pool) {
    if (pair.x.joint_count() != joints_) throw DataError("estimator train: joint mismatch");
    if (pair.x.length() < rf) throw DataError("estimator train: clip shorter than window");
  }

  std::vector<PairTargets> targets;
  targets.reserve(pool.size());
  for (const auto& pair : pool) targets.push_back(camera_targets(pair));

  store_.step = 0;
  neural::Adam opt(store_, config_.lr);
  Rng rng(seed);

  const int n_joints_rel = joints_ - 1;
  std::vector<EstimatorStepLoss> history;
  double last_logged = -1.0;

  struct WindowDraw {
    std::size_t pair = 0;
    int start = 0;
    int k_out = 0;
  };

  for (int step = 0; step < config_.steps; ++step) {
    store_.zero_grads();
    double pose_loss = 0.0, traj_loss = 0.0;

    std::vector<WindowDraw> draws(config_.batch_windows);
    int outputs_total = 0;
    for (auto& d : draws) {
      d.pair = rng.uniform_index(pool.size());
      const int T = pool[d.pair].x.length();
      const int in_len = rf + config_.window_outputs - 1;
      const int max_start = std::max(0, T - in_len);
      d.start = static_cast<int>(rng.uniform_index(max_start + 1));
      d.k_out = std::min(config_.window_outputs, T - rf - d.start + 1);
      outputs_total += d.k_out;
    }

    for (const WindowDraw& d : draws) {
      const std::size_t p = d.pair;
      const int start = d.start;
      const int k_out = d.k_out;
      const int len = rf + k_out - 1;

      Mat input(2 * joints_, len);
      for (int c = 0; c < len; ++c) {
        for (int j = 0; j < joints_; ++j) {
          input(2 * j, c) = pool[p].x.frames[start + c](j, 0);
          input(2 * j + 1, c) = pool[p].x.frames[start + c](j, 1);
        }
      }

      std::vector<neural::ReLU> relus(stages_);
      Mat h = input;
      for (int s = 0; s < stages_; ++s) h = relus[s].forward(convs_[s]->forward(h));
      const Mat pose = pose_head_->forward(h);
      const Mat traj = traj_head_->forward(h);

      Mat dpose(pose.rows(), k_out), dtraj(3, k_out);
      for (int k = 0; k < k_out; ++k) {
        const int center = start + (rf - 1) / 2 + k;
        const Eigen::VectorXd pe = pose.col(k) - targets[p].pose.col(center);
        pose_loss += pe.squaredNorm() / n_joints_rel / outputs_total;
        dpose.col(k) = 2.0 * pe / n_joints_rel / outputs_total;

        const Eigen::Vector3d te = traj.col(k) - targets[p].traj.col(center);
        const double w = depth_weight(targets[p].traj(2, center));
        traj_loss += w * te.lpNorm<1>() / outputs_total;
        dtraj.col(k) = w * te.array().sign().matrix() / outputs_total;
      }

      Mat dh = pose_head_->backward(dpose) + traj_head_->backward(dtraj);
      for (int s = stages_ - 1; s >= 0; --s) dh = convs_[s]->backward(relus[s].backward(dh));
    }

    opt.step();

    if (step % config_.log_every == 0 || step == config_.steps - 1) {
      const double total = pose_loss + traj_loss;
      if (last_logged >= 0.0 && total > 10.0 * last_logged && total > 1e-12) {
        throw TrainError("estimator diverged: loss " + std::to_string(total) + " vs " +
                         std::to_string(last_logged) + " at step " + std::to_string(step));
      }
      last_logged = total;
      history.push_back({step, pose_loss, traj_loss});
    }
  }
  return history;
}

EstimatorLoss Estimator::evaluate_loss(const std::vector<PairedSample>& pool) const {
  if (pool.empty()) throw DataError("estimator evaluate: empty dataset");
  EstimatorLoss loss;
  long frames_total = 0;
  for (const auto& pair : pool) {
    const PairTargets tgt = camera_targets(pair);
    const MotionSequence3D pred = estimate(pair.x);
    for (int t = 0; t < pred.length(); ++t) {
      const Eigen::Vector3d root = pred.frames[t].row(0).transpose();
      for (int j = 1; j < joints_; ++j) {
        const Eigen::Vector3d rel = pred.frames[t].row(j).transpose() - root;
        loss.pose_mse +=
            (rel - Eigen::Vector3d(tgt.pose.col(t).segment<3>(3 * (j - 1)))).squaredNorm() /
            (joints_ - 1);
      }
      const double w = depth_weight(tgt.traj(2, t));
      loss.traj_l1 += w * (root - Eigen::Vector3d(tgt.traj.col(t))).lpNorm<1>();
      ++frames_total;
    }
  }
  loss.pose_mse /= frames_total;
  loss.traj_l1 /= frames_total;
  return loss;
}

void Estimator::save(const std::filesystem::path& path) const {
  neural::save_checkpoint(store_, path);
}

void Estimator::load(const std::filesystem::path& path) {
  neural::load_checkpoint(store_, path);
}

}  // namespace poseloop::est
