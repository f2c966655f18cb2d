#include "poseloop/cam/gan.hpp"

#include <algorithm>
#include <cmath>

#include "poseloop/common/error.hpp"
#include "poseloop/neural/checkpoint.hpp"

namespace poseloop::cam {

using motion::MotionSequence3D;
using motion::Pose2DSequence;

namespace {

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double squash(double raw, double lo, double hi) {
  return 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::tanh(raw);
}

// d squash / d raw.
double squash_slope(double raw, double lo, double hi) {
  const double t = std::tanh(raw);
  return 0.5 * (hi - lo) * (1.0 - t * t);
}

Mat window_from_2d(const Pose2DSequence& s, int start, int len) {
  const int joints = s.joint_count();
  Mat win(2 * joints, len);
  for (int c = 0; c < len; ++c) {
    for (int j = 0; j < joints; ++j) {
      win(2 * j, c) = s.frames[start + c](j, 0);
      win(2 * j + 1, c) = s.frames[start + c](j, 1);
    }
  }
  return win;
}

Mat window_from_projection(const Camera& camera, const MotionSequence3D& m, int start, int len) {
  const int joints = m.joint_count();
  Mat win(2 * joints, len);
  for (int c = 0; c < len; ++c) {
    for (int j = 0; j < joints; ++j) {
      const Eigen::Vector2d uv = camera.project_point(m.frames[start + c].row(j).transpose());
      win(2 * j, c) = uv.x();
      win(2 * j + 1, c) = uv.y();
    }
  }
  return win;
}

}  // namespace

CameraGan::CameraGan(const SkeletonSpec& skel, const CameraGanConfig& config, std::uint64_t seed)
    : skel_(skel), config_(config), joints_(skel.joint_count()) {
  validate_sampler_config(config.ranges);
  if (config.noise_dim < 1 || config.hidden < 1 || config.disc_channels < 1 ||
      config.batch < 1 || config.steps < 1 || config.gen_lr < 0 || config.disc_lr <= 0) {
    throw ConfigError("bad camera gan config");
  }
  if (config.disc_window < 5) {
    throw ConfigError("disc_window must cover two kernel-3 convolutions (>= 5 frames)");
  }

  const int summary_dim = 6 * joints_;
  gen_store_.seed = derive_seed(seed, "cam.gan.gen");
  Rng grng(gen_store_.seed);
  g1_ = std::make_unique<neural::Dense>(gen_store_, "gen.l1", summary_dim + config.noise_dim,
                                        config.hidden, grng);
  g2_ = std::make_unique<neural::Dense>(gen_store_, "gen.l2", config.hidden, 3, grng);

  disc_store_.seed = derive_seed(seed, "cam.gan.disc");
  Rng drng(disc_store_.seed);
  d1_ = std::make_unique<neural::Conv1d>(disc_store_, "disc.c1", 2 * joints_,
                                         config.disc_channels, 3, 1, drng);
  d2_ = std::make_unique<neural::Conv1d>(disc_store_, "disc.c2", config.disc_channels,
                                         config.disc_channels, 3, 1, drng);
  dhead_ = std::make_unique<neural::Dense>(disc_store_, "disc.head", config.disc_channels, 1,
                                           drng);
}

Eigen::VectorXd CameraGan::summarize(const MotionSequence3D& motion) const {
  if (motion.length() == 0) throw DataError("cannot summarize an empty motion");
  if (motion.joint_count() != joints_) {
    throw DataError("camera gan: motion joint count mismatch");
  }
  const int lh = skel_.find_joint("l_hip");
  const int rh = skel_.find_joint("r_hip");

  const int dim = 3 * joints_;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  for (const auto& frame : motion.frames) {
    double yaw = 0.0;
    if (lh >= 0 && rh >= 0) {
      // Hip axis points left; the facing direction is its -90 deg rotation.
      const double ax = frame(lh, 0) - frame(rh, 0);
      const double ay = frame(lh, 1) - frame(rh, 1);
      if (ax * ax + ay * ay > 1e-12) yaw = std::atan2(-ax, ay);
    }
    const double c = std::cos(yaw), s = std::sin(yaw);
    for (int j = 0; j < joints_; ++j) {
      const double dx = frame(j, 0) - frame(0, 0);
      const double dy = frame(j, 1) - frame(0, 1);
      const double dz = frame(j, 2) - frame(0, 2);
      Eigen::Vector3d local(c * dx + s * dy, -s * dx + c * dy, dz);
      sum.segment<3>(3 * j) += local;
      sumsq.segment<3>(3 * j) += local.cwiseProduct(local);
    }
  }
  const double n = motion.length();
  Eigen::VectorXd out(2 * dim);
  out.head(dim) = sum / n;
  out.tail(dim) =
      (sumsq / n - out.head(dim).cwiseProduct(out.head(dim))).cwiseMax(0.0).cwiseSqrt();
  return out;
}

Eigen::Vector3d CameraGan::placement(const Eigen::VectorXd& summary, Rng& rng) const {
  Eigen::VectorXd in(summary.size() + config_.noise_dim);
  in.head(summary.size()) = summary;
  for (int i = 0; i < config_.noise_dim; ++i) in(summary.size() + i) = rng.normal();

  const Mat h = g1_->infer(in).array().tanh().matrix();
  const Mat o = g2_->infer(h);
  const auto& r = config_.ranges;
  return {squash(o(0, 0), r.height_lo, r.height_hi),
          squash(o(1, 0), r.distance_lo, r.distance_hi),
          squash(o(2, 0), r.azimuth_lo, r.azimuth_hi)};
}

Camera CameraGan::sample(const MotionSequence3D& motion, std::uint64_t seed) const {
  const Eigen::VectorXd summary = summarize(motion);
  Rng rng(seed);
  const Eigen::Vector3d p = placement(summary, rng);
  return place_aimed_camera(config_.ranges, p.x(), p.y(), p.z(), mean_root_position(motion));
}

double CameraGan::disc_logit_infer(const Mat& window) const {
  Mat h = d1_->infer(window).cwiseMax(0.0);
  h = d2_->infer(h).cwiseMax(0.0);
  const Eigen::VectorXd pooled = h.rowwise().mean();
  return dhead_->infer(pooled)(0, 0);
}

namespace {

void validate_pools(int joints, int window, const std::vector<Pose2DSequence>& real2d,
                    const std::vector<MotionSequence3D>& motions) {
  if (real2d.empty() || motions.empty()) throw DataError("camera gan: empty pool");
  for (const auto& s : real2d) {
    if (s.joint_count() != joints) throw DataError("camera gan: 2d joint mismatch");
    if (s.length() < window) throw DataError("camera gan: 2d clip shorter than disc window");
  }
  for (const auto& m : motions) {
    if (m.joint_count() != joints) throw DataError("camera gan: 3d joint mismatch");
    if (m.length() < window) throw DataError("camera gan: motion shorter than disc window");
  }
}

}  // namespace

std::vector<CameraGanStats> CameraGan::train(const std::vector<Pose2DSequence>& real2d,
                                             const std::vector<MotionSequence3D>& motions,
                                             std::uint64_t seed) {
  const int W = config_.disc_window;
  validate_pools(joints_, W, real2d, motions);

  std::vector<Eigen::VectorXd> summaries;
  std::vector<Vec3> targets;
  summaries.reserve(motions.size());
  targets.reserve(motions.size());
  for (const auto& m : motions) {
    summaries.push_back(summarize(m));
    targets.push_back(mean_root_position(m));
  }

  gen_store_.step = 0;
  disc_store_.step = 0;
  neural::Adam gen_opt(gen_store_, config_.gen_lr);
  neural::Adam disc_opt(disc_store_, config_.disc_lr);
  Rng rng(seed);

  const auto& r = config_.ranges;
  const double fd_eps = 1e-4;

  // Forward through the discriminator with caches, then push dlogit back.
  auto disc_train_pass = [&](const Mat& window, double dlogit_sign_target) -> double {
    neural::ReLU relu1, relu2;
    const Mat h1 = relu1.forward(d1_->forward(window));
    const Mat h2 = relu2.forward(d2_->forward(h1));
    const Eigen::VectorXd pooled = h2.rowwise().mean();
    const double z = dhead_->forward(pooled)(0, 0);

    const double label = dlogit_sign_target;
    const double dz = 1.0 / (1.0 + std::exp(-z)) - label;
    Mat dpooled = dhead_->backward(Mat::Constant(1, 1, dz));
    Mat dh2 = (dpooled / h2.cols()).replicate(1, h2.cols());
    d1_->backward(relu1.backward(d2_->backward(relu2.backward(dh2))));
    return z;
  };

  std::vector<CameraGanStats> history;
  for (int step = 0; step < config_.steps; ++step) {
    CameraGanStats st;
    st.step = step;

    // Discriminator phase.
    disc_store_.zero_grads();
    int correct = 0;
    for (int i = 0; i < config_.batch; ++i) {
      const auto& s = real2d[rng.uniform_index(real2d.size())];
      const int start = static_cast<int>(rng.uniform_index(s.length() - W + 1));
      const double z = disc_train_pass(window_from_2d(s, start, W), 1.0);
      st.disc_loss += stable_softplus(-z);
      if (z > 0.0) ++correct;
    }
    for (int i = 0; i < config_.batch; ++i) {
      const std::size_t mi = rng.uniform_index(motions.size());
      const auto& m = motions[mi];
      const int start = static_cast<int>(rng.uniform_index(m.length() - W + 1));
      const Eigen::Vector3d p = placement(summaries[mi], rng);
      const Camera cam = place_aimed_camera(r, p.x(), p.y(), p.z(), targets[mi]);
      const double z = disc_train_pass(window_from_projection(cam, m, start, W), 0.0);
      st.disc_loss += stable_softplus(z);
      if (z < 0.0) ++correct;
    }
    disc_opt.step();
    st.disc_loss /= 2.0 * config_.batch;
    st.disc_accuracy = static_cast<double>(correct) / (2.0 * config_.batch);

    // Generator phase: non-saturating loss, finite differences through the
    // projection on the three placement scalars, analytic below the squash.
    gen_store_.zero_grads();
    for (int i = 0; i < config_.batch; ++i) {
      const std::size_t mi = rng.uniform_index(motions.size());
      const auto& m = motions[mi];
      const int start = static_cast<int>(rng.uniform_index(m.length() - W + 1));

      Eigen::VectorXd in(summaries[mi].size() + config_.noise_dim);
      in.head(summaries[mi].size()) = summaries[mi];
      for (int k = 0; k < config_.noise_dim; ++k) in(summaries[mi].size() + k) = rng.normal();

      const Mat h1 = g1_->forward(in);
      const Mat th = h1.array().tanh().matrix();
      const Mat o = g2_->forward(th);
      Eigen::Vector3d p(squash(o(0, 0), r.height_lo, r.height_hi),
                        squash(o(1, 0), r.distance_lo, r.distance_hi),
                        squash(o(2, 0), r.azimuth_lo, r.azimuth_hi));

      auto loss_at = [&](const Eigen::Vector3d& g) {
        const Camera cam = place_aimed_camera(r, g.x(), g.y(), g.z(), targets[mi]);
        return stable_softplus(-disc_logit_infer(window_from_projection(cam, m, start, W)));
      };
      st.gen_loss += loss_at(p);

      Eigen::Vector3d dp;
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d hi = p, lo = p;
        hi(k) += fd_eps;
        lo(k) -= fd_eps;
        dp(k) = (loss_at(hi) - loss_at(lo)) / (2.0 * fd_eps);
      }

      Mat dout(3, 1);
      dout(0, 0) = dp(0) * squash_slope(o(0, 0), r.height_lo, r.height_hi);
      dout(1, 0) = dp(1) * squash_slope(o(1, 0), r.distance_lo, r.distance_hi);
      dout(2, 0) = dp(2) * squash_slope(o(2, 0), r.azimuth_lo, r.azimuth_hi);
      const Mat dth = g2_->backward(dout);
      g1_->backward((dth.array() * (1.0 - th.array().square())).matrix());
    }
    gen_opt.step();
    st.gen_loss /= config_.batch;

    if (step % config_.log_every == 0 || step == config_.steps - 1) history.push_back(st);
  }
  return history;
}

double CameraGan::disc_accuracy(const std::vector<Pose2DSequence>& real2d,
                                const std::vector<MotionSequence3D>& motions,
                                std::uint64_t seed, int n) const {
  const int W = config_.disc_window;
  validate_pools(joints_, W, real2d, motions);
  if (n < 1) throw ConfigError("disc_accuracy: n must be >= 1");
  Rng rng(seed);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const auto& s = real2d[rng.uniform_index(real2d.size())];
    const int start = static_cast<int>(rng.uniform_index(s.length() - W + 1));
    if (disc_logit_infer(window_from_2d(s, start, W)) > 0.0) ++correct;
  }
  for (int i = 0; i < n; ++i) {
    const std::size_t mi = rng.uniform_index(motions.size());
    const auto& m = motions[mi];
    const int start = static_cast<int>(rng.uniform_index(m.length() - W + 1));
    const Eigen::Vector3d p = placement(summarize(m), rng);
    const Camera cam = place_aimed_camera(config_.ranges, p.x(), p.y(), p.z(),
                                          mean_root_position(m));
    if (disc_logit_infer(window_from_projection(cam, m, start, W)) < 0.0) ++correct;
  }
  return static_cast<double>(correct) / (2.0 * n);
}

void CameraGan::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  neural::save_checkpoint(gen_store_, dir / "gen.ckpt");
  neural::save_checkpoint(disc_store_, dir / "disc.ckpt");
}

void CameraGan::load(const std::filesystem::path& dir) {
  neural::load_checkpoint(gen_store_, dir / "gen.ckpt");
  neural::load_checkpoint(disc_store_, dir / "disc.ckpt");
}

Camera sample_camera_mixed(const CameraGan* gan, const CameraSamplerConfig& config,
                           const motion::MotionSequence3D& motion, double mix_ratio,
                           std::uint64_t seed) {
  if (mix_ratio < 0.0 || mix_ratio > 1.0) throw ConfigError("mix_ratio must be in [0, 1]");
  Rng rng(seed);
  const bool use_gan = gan != nullptr && rng.uniform() < mix_ratio;
  const std::uint64_t sub = rng.next_u64();
  if (use_gan) return gan->sample(motion, sub);
  return sample_random_camera(config, motion, sub);
}

}  // namespace poseloop::cam
