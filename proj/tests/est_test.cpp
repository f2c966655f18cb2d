#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "poseloop/cam/camera.hpp"
#include "poseloop/common/error.hpp"
#include "poseloop/common/rng.hpp"
#include "poseloop/est/estimator.hpp"

using namespace poseloop;
using namespace poseloop::est;
using motion::MotionSequence3D;
using motion::Pose2DSequence;
using motion::StageTag;

namespace {

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

cam::Camera identity_camera() {
  cam::Camera c;
  c.position = Eigen::Vector3d::Zero();
  c.orientation = Eigen::Quaterniond::Identity();
  c.focal = 1.0;
  return c;
}

// Smooth world-frame motion in front of an identity camera: every joint keeps
// depth > 2 m so projections are always valid from nearby cameras too.
MotionSequence3D smooth_motion(int joints, int frames, Rng& rng) {
  MotionSequence3D m;
  m.fps = 30;
  m.stage = StageTag::ground_truth;
  std::vector<double> phase(3 * joints), amp(3 * joints);
  for (auto& p : phase) p = rng.uniform(0.0, 6.28);
  for (auto& a : amp) a = rng.uniform(0.05, 0.25);
  m.frames.resize(frames);
  for (int t = 0; t < frames; ++t) {
    Eigen::MatrixXd f(joints, 3);
    for (int j = 0; j < joints; ++j) {
      for (int c = 0; c < 3; ++c) {
        const int i = 3 * j + c;
        f(j, c) = amp[i] * std::sin(0.13 * t + phase[i]);
      }
      f(j, 2) += 2.5;
    }
    m.frames[t] = f;
  }
  return m;
}

PairedSample make_pair(const MotionSequence3D& X, const cam::Camera& cam) {
  PairedSample p;
  p.X = X;
  p.camera = cam;
  p.x = cam::project_motion(cam, X);
  return p;
}

std::vector<PairedSample> small_pool(int joints, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PairedSample> pool;
  pool.push_back(make_pair(smooth_motion(joints, 24, rng), identity_camera()));
  const cam::Camera side =
      cam::look_at_camera(Eigen::Vector3d(2.0, 1.5, -1.0), Eigen::Vector3d(0, 0, 2.5));
  pool.push_back(make_pair(smooth_motion(joints, 30, rng), side));
  return pool;
}

EstimatorConfig tiny_config() {
  EstimatorConfig cfg;
  cfg.receptive_field = 9;
  cfg.channels = 32;
  cfg.steps = 40;
  cfg.batch_windows = 4;
  cfg.window_outputs = 4;
  cfg.log_every = 10;
  return cfg;
}

bool frames_equal(const MotionSequence3D& a, const MotionSequence3D& b) {
  if (a.length() != b.length()) return false;
  for (int t = 0; t < a.length(); ++t) {
    if (a.frames[t] != b.frames[t]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("estimator config validation") {
  EstimatorConfig cfg = tiny_config();
  CHECK_NOTHROW(Estimator(4, cfg, 1));
  cfg.receptive_field = 27;
  CHECK_NOTHROW(Estimator(4, cfg, 1));
  cfg.receptive_field = 3;
  CHECK_NOTHROW(Estimator(4, cfg, 1));

  cfg.receptive_field = 8;
  CHECK_THROWS_AS(Estimator(4, cfg, 1), ConfigError);
  cfg.receptive_field = 5;  // odd but not a kernel-3 dilation stack
  CHECK_THROWS_AS(Estimator(4, cfg, 1), ConfigError);
  cfg.receptive_field = 1;
  CHECK_THROWS_AS(Estimator(4, cfg, 1), ConfigError);

  cfg = tiny_config();
  CHECK_THROWS_AS(Estimator(1, cfg, 1), ConfigError);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(Estimator(4, cfg, 1), ConfigError);
  cfg = tiny_config();
  cfg.channels = 0;
  CHECK_THROWS_AS(Estimator(4, cfg, 1), ConfigError);
}

TEST_CASE("validate_pair accepts projections and rejects tampered pairs") {
  Rng rng(5);
  const MotionSequence3D X = smooth_motion(4, 12, rng);
  const cam::Camera cam =
      cam::look_at_camera(Eigen::Vector3d(1.5, -1.0, 0.0), Eigen::Vector3d(0, 0, 2.5));
  PairedSample pair = make_pair(X, cam);
  CHECK_NOTHROW(validate_pair(pair));

  PairedSample tampered = pair;
  tampered.x.frames[3](1, 0) += 1e-6;
  CHECK_THROWS_AS(validate_pair(tampered), DataError);

  PairedSample short2d = pair;
  short2d.x.frames.pop_back();
  CHECK_THROWS_AS(validate_pair(short2d), DataError);
}

TEST_CASE("untrained estimator outputs the trajectory branch for every joint") {
  Rng rng(9);
  const MotionSequence3D X = smooth_motion(5, 14, rng);
  const PairedSample pair = make_pair(X, identity_camera());

  const Estimator est(5, tiny_config(), 3);
  const MotionSequence3D out = est.estimate(pair.x);

  CHECK(out.length() == 14);
  CHECK(out.fps == pair.x.fps);
  CHECK(out.stage == StageTag::raw_estimate);
  for (int t = 0; t < out.length(); ++t) {
    for (int j = 1; j < 5; ++j) {
      CHECK(out.frames[t].row(j) == out.frames[t].row(0));  // zero pose branch
    }
    CHECK(out.frames[t].norm() == 0.0);  // zero trajectory head too
  }

  // Shorter-than-receptive-field inputs are edge-padded, not rejected.
  Pose2DSequence tiny;
  tiny.fps = 30;
  tiny.frames.assign(pair.x.frames.begin(), pair.x.frames.begin() + 3);
  CHECK(est.estimate(tiny).length() == 3);
}

TEST_CASE("estimate errors on malformed input") {
  const Estimator est(4, tiny_config(), 3);
  Rng rng(11);
  const MotionSequence3D X = smooth_motion(6, 12, rng);
  const PairedSample pair = make_pair(X, identity_camera());
  CHECK_THROWS_AS(est.estimate(pair.x), DataError);  // 6 joints, estimator expects 4

  Pose2DSequence empty;
  empty.fps = 30;
  CHECK_THROWS_AS(est.estimate(empty), DataError);
}

TEST_CASE("constant input gives constant output and shifts commute with estimate") {
  const int J = 4;
  Estimator est(J, tiny_config(), 21);
  est.train(small_pool(J, 77), 13);  // non-trivial params, heads no longer zero

  Rng rng(31);
  const MotionSequence3D base = smooth_motion(J, 50, rng);
  const Pose2DSequence x = cam::project_motion(identity_camera(), base);

  Pose2DSequence constant;
  constant.fps = 30;
  constant.frames.assign(30, x.frames[7]);
  const MotionSequence3D cout_ = est.estimate(constant);
  for (int t = 1; t < cout_.length(); ++t) CHECK(cout_.frames[t] == cout_.frames[0]);

  // x1 = s[0..39], x2 = s[5..44]; interior outputs must match bit for bit.
  Pose2DSequence x1, x2;
  x1.fps = x2.fps = 30;
  x1.frames.assign(x.frames.begin(), x.frames.begin() + 40);
  x2.frames.assign(x.frames.begin() + 5, x.frames.begin() + 45);
  const MotionSequence3D y1 = est.estimate(x1);
  const MotionSequence3D y2 = est.estimate(x2);
  const int pad = (est.config().receptive_field - 1) / 2;
  int compared = 0;
  for (int t = pad; t + 5 <= 40 - 1 - pad; ++t) {
    CHECK(y1.frames[t + 5] == y2.frames[t]);
    ++compared;
  }
  CHECK(compared >= 10);
}

TEST_CASE("evaluate_loss closed forms on an untrained estimator") {
  // Two frames, root on the optical axis at depth 2 then 3, both non-root
  // joints exactly 10 mm from the root. The untrained estimator predicts the
  // all-root pose at the origin, so:
  //   pose-MSE  = (10 mm)^2            = 1e-4 m^2
  //   traj-L1   = mean of (1/z) * z    = 1
  MotionSequence3D X;
  X.fps = 30;
  X.stage = StageTag::ground_truth;
  for (int t = 0; t < 2; ++t) {
    Eigen::MatrixXd f(3, 3);
    f.row(0) = Eigen::RowVector3d(0.0, 0.0, 2.0 + t);
    f.row(1) = f.row(0) + Eigen::RowVector3d(0.01, 0.0, 0.0);
    f.row(2) = f.row(0) + Eigen::RowVector3d(0.0, 0.01, 0.0);
    X.frames.push_back(f);
  }
  const PairedSample pair = make_pair(X, identity_camera());
  CHECK_NOTHROW(validate_pair(pair));

  const Estimator est(3, tiny_config(), 4);
  const EstimatorLoss loss = est.evaluate_loss({pair});
  CHECK(loss.pose_mse == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(loss.traj_l1 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(est.evaluate_loss({}), DataError);
}

TEST_CASE("evaluate_loss is exactly zero when predictions equal targets") {
  const int J = 4;
  Estimator est(J, tiny_config(), 2);
  est.train(small_pool(J, 55), 8);

  Rng rng(61);
  const MotionSequence3D probe = smooth_motion(J, 16, rng);
  const Pose2DSequence x = cam::project_motion(identity_camera(), probe);

  // Reinterpret the estimator's own camera-frame output as a world motion
  // seen through the identity camera: predictions then equal targets.
  PairedSample self;
  self.x = x;
  self.X = est.estimate(x);
  self.camera = identity_camera();
  const EstimatorLoss loss = est.evaluate_loss({self});
  CHECK(loss.pose_mse == 0.0);
  CHECK(loss.traj_l1 == 0.0);
}

TEST_CASE("memorizing a single window drives training loss below 1% of initial") {
  MotionSequence3D X;
  X.fps = 30;
  X.stage = StageTag::ground_truth;
  for (int t = 0; t < 9; ++t) {
    Eigen::MatrixXd f(3, 3);
    f.row(0) = Eigen::RowVector3d(0.02 + 0.01 * t, -0.03, 0.5);
    f.row(1) = f.row(0) + Eigen::RowVector3d(0.4, 0.2, 0.0);
    f.row(2) = f.row(0) + Eigen::RowVector3d(-0.3, 0.35, 0.0);
    X.frames.push_back(f);
  }
  const PairedSample pair = make_pair(X, identity_camera());

  EstimatorConfig cfg;
  cfg.receptive_field = 9;
  cfg.channels = 32;
  cfg.lr = 1e-3;
  cfg.steps = 200;
  cfg.batch_windows = 1;
  cfg.window_outputs = 1;
  cfg.log_every = 20;
  Estimator est(3, cfg, 17);
  const auto history = est.train({pair}, 23);

  REQUIRE(!history.empty());
  CHECK(history.front().step == 0);
  CHECK(history.back().step == cfg.steps - 1);
  const double initial = history.front().pose_mse + history.front().traj_l1;
  const double final_loss = history.back().pose_mse + history.back().traj_l1;
  CHECK(initial > 0.1);
  CHECK(final_loss < 0.01 * initial);
}

TEST_CASE("train validates its dataset") {
  Estimator est(4, tiny_config(), 1);
  CHECK_THROWS_AS(est.train({}, 1), DataError);

  Rng rng(3);
  std::vector<PairedSample> bad;
  bad.push_back(make_pair(smooth_motion(4, 5, rng), identity_camera()));
  CHECK_THROWS_AS(est.train(bad, 1), DataError);  // shorter than the receptive field

  std::vector<PairedSample> mixed;
  mixed.push_back(make_pair(smooth_motion(5, 20, rng), identity_camera()));
  CHECK_THROWS_AS(est.train(mixed, 1), DataError);  // joint mismatch
}

TEST_CASE("training is deterministic given the seed and seeds separate") {
  const int J = 4;
  const auto pool = small_pool(J, 99);
  Rng rng(7);
  const MotionSequence3D probe = smooth_motion(J, 18, rng);
  const Pose2DSequence px = cam::project_motion(identity_camera(), probe);

  Estimator a(J, tiny_config(), 5);
  Estimator b(J, tiny_config(), 5);
  const auto ha = a.train(pool, 31);
  const auto hb = b.train(pool, 31);
  REQUIRE(ha.size() == hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].pose_mse == hb[i].pose_mse);
    CHECK(ha[i].traj_l1 == hb[i].traj_l1);
  }
  CHECK(frames_equal(a.estimate(px), b.estimate(px)));

  Estimator c(J, tiny_config(), 5);
  c.train(pool, 32);
  CHECK(!frames_equal(a.estimate(px), c.estimate(px)));
}

TEST_CASE("divergence guard aborts a training run that blows up") {
  const int J = 4;
  EstimatorConfig cfg = tiny_config();
  cfg.lr = 1e6;
  cfg.steps = 10;
  cfg.log_every = 1;
  Estimator est(J, cfg, 6);
  CHECK_THROWS_AS(est.train(small_pool(J, 44), 3), TrainError);
}

TEST_CASE("checkpoint round trip restores the estimator exactly") {
  const int J = 4;
  const auto pool = small_pool(J, 12);
  Estimator trained(J, tiny_config(), 40);
  trained.train(pool, 41);

  const auto path = temp_path("est_roundtrip.ckpt");
  trained.save(path);

  Estimator restored(J, tiny_config(), 999);  // different init, overwritten by load
  restored.load(path);

  Rng rng(8);
  const Pose2DSequence probe =
      cam::project_motion(identity_camera(), smooth_motion(J, 22, rng));
  CHECK(frames_equal(trained.estimate(probe), restored.estimate(probe)));

  const EstimatorLoss la = trained.evaluate_loss(pool);
  const EstimatorLoss lb = restored.evaluate_loss(pool);
  CHECK(la.pose_mse == lb.pose_mse);
  CHECK(la.traj_l1 == lb.traj_l1);
  std::filesystem::remove(path);
}
