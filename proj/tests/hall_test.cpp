#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "poseloop/common/error.hpp"
#include "poseloop/common/rng.hpp"
#include "poseloop/hall/hallucinator.hpp"
#include "poseloop/motion/geometry.hpp"

using namespace poseloop;
using namespace poseloop::hall;
using motion::Quat;
using motion::ReducedFrame;
using motion::ReducedPoseSequence;
using motion::Vec3;

namespace {

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

bool exact_eq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

bool frame_eq(const ReducedFrame& a, const ReducedFrame& b) {
  return (a.root_pos.array() == b.root_pos.array()).all() &&
         (a.root_rot.coeffs().array() == b.root_rot.coeffs().array()).all() &&
         exact_eq(a.angles, b.angles);
}

// Smooth drifting clip with bounded joint wiggles around a random base pose.
ReducedPoseSequence smooth_clip(const motion::SkeletonSpec& skel, int frames,
                                std::uint64_t seed) {
  Rng rng(seed);
  const int nd = skel.non_root_dof();
  Eigen::VectorXd phase(nd), amp(nd), base(nd);
  for (int i = 0; i < nd; ++i) {
    phase(i) = rng.uniform(0.0, 6.28);
    amp(i) = rng.uniform(0.05, 0.3);
    base(i) = rng.uniform(-0.2, 0.2);
  }
  const double yaw0 = rng.uniform(-M_PI, M_PI);
  ReducedPoseSequence clip;
  clip.fps = 30.0;
  clip.frames.resize(frames);
  for (int t = 0; t < frames; ++t) {
    ReducedFrame f;
    f.root_pos = Vec3(0.03 * t, 0.3 * std::sin(0.1 * t), 0.9 + 0.05 * std::sin(0.17 * t));
    f.root_rot = motion::yaw_quat(yaw0 + 0.02 * t) *
                 motion::quat_exp(Vec3(0.05 * std::sin(0.11 * t), 0.05 * std::cos(0.13 * t), 0));
    f.angles.resize(nd);
    for (int i = 0; i < nd; ++i) f.angles(i) = base(i) + amp(i) * std::sin(0.21 * t + phase(i));
    clip.frames[t] = f;
  }
  return clip;
}

ReducedPoseSequence constant_clip(const motion::SkeletonSpec& skel, int frames, double value,
                                  double yaw) {
  ReducedFrame f;
  f.root_pos = Vec3(0.0, 0.0, 0.9);
  f.root_rot = motion::yaw_quat(yaw);
  f.angles = Eigen::VectorXd::Constant(skel.non_root_dof(), value);
  ReducedPoseSequence clip;
  clip.fps = 30.0;
  clip.frames.assign(frames, f);
  return clip;
}

std::vector<ReducedPoseSequence> smooth_pool(const motion::SkeletonSpec& skel, int clips,
                                             int frames, std::uint64_t seed) {
  std::vector<ReducedPoseSequence> pool;
  for (int i = 0; i < clips; ++i) pool.push_back(smooth_clip(skel, frames, seed + i));
  return pool;
}

HallucinatorConfig fast_config() {
  HallucinatorConfig cfg;
  cfg.hidden = 48;
  cfg.disc_channels = 12;
  cfg.steps = 30;
  cfg.batch = 4;
  cfg.log_every = 10;
  return cfg;
}

ReducedFrame random_frame(const motion::SkeletonSpec& skel, Rng& rng) {
  ReducedFrame f;
  f.root_pos = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 1.5));
  f.root_rot = motion::quat_exp(
      Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-3, 3)));
  f.angles.resize(skel.non_root_dof());
  for (int i = 0; i < f.angles.size(); ++i) f.angles(i) = rng.uniform(-1.0, 1.0);
  return f;
}

}  // namespace

TEST_CASE("hallucinator config validation") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  auto bad = [&](auto mutate) {
    HallucinatorConfig cfg = fast_config();
    mutate(cfg);
    CHECK_THROWS_AS(Hallucinator(skel, cfg, 1), ConfigError);
  };
  bad([](HallucinatorConfig& c) { c.k = 1; });
  bad([](HallucinatorConfig& c) { c.gen_lr = 0.0; });
  bad([](HallucinatorConfig& c) { c.disc_lr = 0.0; });
  bad([](HallucinatorConfig& c) { c.adv_weight = -0.1; });
  bad([](HallucinatorConfig& c) { c.bptt_window = 0; });
  bad([](HallucinatorConfig& c) { c.hidden = 0; });
  bad([](HallucinatorConfig& c) { c.disc_channels = 0; });
  bad([](HallucinatorConfig& c) { c.disc_window = 4; });
  bad([](HallucinatorConfig& c) { c.v_max = 0.0; });
  bad([](HallucinatorConfig& c) { c.steps = 0; });
  bad([](HallucinatorConfig& c) { c.batch = 0; });
  bad([](HallucinatorConfig& c) { c.log_every = 0; });
  CHECK_NOTHROW(Hallucinator(skel, HallucinatorConfig{}, 1));
}

TEST_CASE("anchor-local encoding round trips and ignores yaw and translation") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const Hallucinator hall(skel, fast_config(), 3);
  CHECK(hall.encoding_dim() == 6 + skel.non_root_dof());
  Rng rng(11);

  for (int trial = 0; trial < 50; ++trial) {
    const ReducedFrame anchor = random_frame(skel, rng);
    const ReducedFrame frame = random_frame(skel, rng);

    const Eigen::VectorXd enc = hall.encode_local(anchor, frame);
    REQUIRE(enc.size() == hall.encoding_dim());
    const ReducedFrame back = hall.decode_local(anchor, enc);
    CHECK((back.root_pos - frame.root_pos).norm() <= 1e-12);
    CHECK(motion::quat_angle(back.root_rot, frame.root_rot) <= 1e-9);
    CHECK(exact_eq(back.angles, frame.angles));

    // The chart ignores a shared yaw-about-origin plus translation.
    const double alpha = rng.uniform(-M_PI, M_PI);
    const Quat r = motion::yaw_quat(alpha);
    const Vec3 shift(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
    auto moved = [&](const ReducedFrame& f) {
      ReducedFrame g = f;
      g.root_pos = r * f.root_pos + shift;
      g.root_rot = r * f.root_rot;
      return g;
    };
    const Eigen::VectorXd enc2 = hall.encode_local(moved(anchor), moved(frame));
    CHECK((enc2 - enc).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("within-clip keyframes take every k-th frame verbatim") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  std::vector<ReducedPoseSequence> pool{smooth_clip(skel, 61, 5)};

  const KeyframeSet keys =
      sample_keyframes(skel, cfg, pool, 61, KeyframeMode::within_clip, 9);
  REQUIRE(keys.anchors.size() == 5);
  CHECK(keys.fps == pool[0].fps);
  for (int i = 0; i < 5; ++i) {
    CHECK(keys.anchors[i].index == 15 * i);
    CHECK(frame_eq(keys.anchors[i].pose, pool[0].frames[15 * i]));
  }
  CHECK_NOTHROW(validate_keyframes(skel, keys, cfg.k));

  // target_length caps the anchor range.
  const KeyframeSet capped =
      sample_keyframes(skel, cfg, pool, 31, KeyframeMode::within_clip, 9);
  REQUIRE(capped.anchors.size() == 3);
  CHECK(capped.anchors.back().index == 30);
}

TEST_CASE("cross-clip keyframes stitch clips with bounded motion") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  std::vector<ReducedPoseSequence> pool;
  pool.push_back(smooth_clip(skel, 50, 21));
  pool.push_back(smooth_clip(skel, 60, 22));
  pool.push_back(smooth_clip(skel, 70, 23));

  const double bound = 1.5 * (cfg.k / pool[0].fps) * cfg.v_max;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const KeyframeSet keys =
        sample_keyframes(skel, cfg, pool, 61, KeyframeMode::cross_clip, seed);
    REQUIRE(keys.anchors.size() == 5);
    CHECK_NOTHROW(validate_keyframes(skel, keys, cfg.k));
    for (std::size_t i = 0; i < keys.anchors.size(); ++i) {
      CHECK(keys.anchors[i].index == 15 * static_cast<int>(i));
      if (i == 0) continue;
      const auto& prev = keys.anchors[i - 1].pose;
      const auto& cur = keys.anchors[i].pose;
      CHECK((cur.root_pos - prev.root_pos).head<2>().norm() <= bound + 1e-12);
      const double dh = motion::wrap_angle(motion::heading_yaw(skel, cur.root_rot) -
                                           motion::heading_yaw(skel, prev.root_rot));
      CHECK(std::abs(dh) <= M_PI / 6 + 1e-9);
    }
  }

  // Same seed reproduces; different seeds move.
  const KeyframeSet a = sample_keyframes(skel, cfg, pool, 61, KeyframeMode::cross_clip, 7);
  const KeyframeSet b = sample_keyframes(skel, cfg, pool, 61, KeyframeMode::cross_clip, 7);
  const KeyframeSet c = sample_keyframes(skel, cfg, pool, 61, KeyframeMode::cross_clip, 8);
  REQUIRE(a.anchors.size() == b.anchors.size());
  for (std::size_t i = 0; i < a.anchors.size(); ++i) {
    CHECK(frame_eq(a.anchors[i].pose, b.anchors[i].pose));
  }
  bool differs = false;
  for (std::size_t i = 0; i < a.anchors.size(); ++i) {
    if (!frame_eq(a.anchors[i].pose, c.anchors[i].pose)) differs = true;
  }
  CHECK(differs);

  // Distinct constant-pose clips expose the source of each anchor: with more
  // than one clip, consecutive anchors must come from different clips.
  std::vector<ReducedPoseSequence> marked;
  marked.push_back(constant_clip(skel, 20, 0.1, 0.0));
  marked.push_back(constant_clip(skel, 20, 0.5, 1.0));
  marked.push_back(constant_clip(skel, 20, 0.9, -1.0));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const KeyframeSet keys =
        sample_keyframes(skel, cfg, marked, 31, KeyframeMode::cross_clip, seed);
    for (std::size_t i = 1; i < keys.anchors.size(); ++i) {
      CHECK(keys.anchors[i].pose.angles(0) != keys.anchors[i - 1].pose.angles(0));
    }
  }
}

TEST_CASE("keyframe and pool validation errors") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  const std::vector<ReducedPoseSequence> empty;
  CHECK_THROWS_AS(sample_keyframes(skel, cfg, empty, 31, KeyframeMode::within_clip, 1),
                  DataError);
  std::vector<ReducedPoseSequence> shorties{smooth_clip(skel, 10, 1)};
  CHECK_THROWS_AS(sample_keyframes(skel, cfg, shorties, 31, KeyframeMode::within_clip, 1),
                  DataError);
  std::vector<ReducedPoseSequence> pool{smooth_clip(skel, 40, 1)};
  CHECK_THROWS_AS(sample_keyframes(skel, cfg, pool, cfg.k, KeyframeMode::within_clip, 1),
                  DataError);

  KeyframeSet keys;
  keys.fps = 30.0;
  const ReducedPoseSequence clip = smooth_clip(skel, 40, 2);
  keys.anchors.push_back({0, clip.frames[0]});
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // one anchor
  keys.anchors.push_back({10, clip.frames[10]});
  CHECK_NOTHROW(validate_keyframes(skel, keys, cfg.k));
  keys.anchors.push_back({10, clip.frames[10]});
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // not increasing
  keys.anchors.back().index = 30;
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // gap 20 > k
  keys.anchors.back().index = 20;
  keys.anchors.back().pose.angles.resize(3);
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // bad dof
  keys.anchors.back().pose = clip.frames[20];
  keys.anchors.back().pose.root_pos.x() = std::nan("");
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // non-finite
  keys.anchors.back().pose = clip.frames[20];
  keys.anchors.front().index = 1;
  CHECK_THROWS_AS(validate_keyframes(skel, keys, cfg.k), DataError);  // must start at 0

  Hallucinator hall(skel, cfg, 1);
  CHECK_THROWS_AS(hall.train(empty, 1), DataError);
  std::vector<ReducedPoseSequence> tiny{smooth_clip(skel, 2, 3)};
  CHECK_THROWS_AS(hall.train(tiny, 1), DataError);  // no gap has an interior frame
  // Adversarial training demands clips spanning a full disc window.
  std::vector<ReducedPoseSequence> sixes{smooth_clip(skel, 6, 4)};
  CHECK_THROWS_AS(hall.train(sixes, 1), DataError);
  HallucinatorConfig recon_only = cfg;
  recon_only.adv_weight = 0.0;
  recon_only.steps = 2;
  Hallucinator pure(skel, recon_only, 1);
  CHECK_NOTHROW(pure.train(sixes, 1));
}

TEST_CASE("hallucination keeps anchors verbatim and bone lengths constant") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 5;
  const Hallucinator hall(skel, cfg, 17);

  std::vector<ReducedPoseSequence> pool{smooth_clip(skel, 16, 6)};
  const KeyframeSet keys = sample_keyframes(skel, cfg, pool, 16, KeyframeMode::within_clip, 2);
  REQUIRE(keys.anchors.size() == 4);

  const ReducedPoseSequence out = hall.hallucinate_reduced(keys);
  CHECK(out.length() == 16);
  CHECK(out.fps == keys.fps);
  for (const auto& kf : keys.anchors) CHECK(frame_eq(out.frames[kf.index], kf.pose));
  for (const auto& f : out.frames) {
    CHECK(f.root_pos.allFinite());
    CHECK(f.root_rot.coeffs().allFinite());
    CHECK(f.angles.allFinite());
    CHECK(std::abs(f.root_rot.norm() - 1.0) <= 1e-9);
  }

  const motion::MotionSequence3D m = hall.hallucinate(keys);
  CHECK(m.stage == motion::StageTag::hallucinated);
  CHECK(m.length() == 16);
  CHECK(m.joint_count() == skel.joint_count());
  CHECK(m.all_finite());
  for (const auto& kf : keys.anchors) {
    const Eigen::MatrixXd ref = motion::forward_kinematics_frame(skel, kf.pose);
    CHECK((m.frames[kf.index] - ref).cwiseAbs().maxCoeff() == 0.0);
  }
  for (const auto& frame : m.frames) {
    for (int j = 0; j < skel.joint_count(); ++j) {
      const int p = skel.joints[j].parent;
      if (p < 0) continue;
      const double len = (frame.row(j) - frame.row(p)).norm();
      CHECK(len == doctest::Approx(motion::bone_length(skel, j)).epsilon(1e-9));
    }
  }

  // Unit gaps carry anchors through untouched; generation starts at gap 2.
  KeyframeSet tight;
  tight.fps = 30.0;
  tight.anchors.push_back({0, pool[0].frames[0]});
  tight.anchors.push_back({1, pool[0].frames[1]});
  tight.anchors.push_back({3, pool[0].frames[3]});
  const ReducedPoseSequence dense = hall.hallucinate_reduced(tight);
  CHECK(dense.length() == 4);
  CHECK(frame_eq(dense.frames[0], pool[0].frames[0]));
  CHECK(frame_eq(dense.frames[1], pool[0].frames[1]));
  CHECK(frame_eq(dense.frames[3], pool[0].frames[3]));
  CHECK(dense.frames[2].angles.allFinite());

  // Cross-clip keyframes hallucinate into finite, anchored motion too.
  std::vector<ReducedPoseSequence> pool3 = smooth_pool(skel, 3, 20, 30);
  const KeyframeSet xkeys = sample_keyframes(skel, cfg, pool3, 16, KeyframeMode::cross_clip, 4);
  const ReducedPoseSequence xout = hall.hallucinate_reduced(xkeys);
  CHECK(xout.length() == xkeys.anchors.back().index + 1);
  for (const auto& kf : xkeys.anchors) CHECK(frame_eq(xout.frames[kf.index], kf.pose));
  for (const auto& f : xout.frames) CHECK(f.angles.allFinite());
}

TEST_CASE("hallucinator memorizes a single gap") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg;
  cfg.k = 4;
  cfg.hidden = 32;
  cfg.adv_weight = 0.0;
  cfg.gen_lr = 1e-3;
  cfg.steps = 500;
  cfg.batch = 1;
  cfg.log_every = 100;

  // Five frames, k = 4: every draw is the same gap over frames 0..4.
  std::vector<ReducedPoseSequence> pool{smooth_clip(skel, 5, 12)};
  Hallucinator hall(skel, cfg, 12);
  const auto history = hall.train(pool, 99);
  REQUIRE(history.size() >= 2);
  CHECK(history.front().step == 0);
  CHECK(history.back().step == cfg.steps - 1);
  CHECK(history.front().recon > 1e-3);
  CHECK(history.back().recon < 0.01 * history.front().recon);

  // The trained in-betweener reproduces the memorized interior frames.
  KeyframeSet keys;
  keys.fps = pool[0].fps;
  keys.anchors.push_back({0, pool[0].frames[0]});
  keys.anchors.push_back({4, pool[0].frames[4]});
  const ReducedPoseSequence out = hall.hallucinate_reduced(keys);
  for (int t = 1; t < 4; ++t) {
    CHECK((out.frames[t].angles - pool[0].frames[t].angles).cwiseAbs().maxCoeff() < 0.05);
    CHECK((out.frames[t].root_pos - pool[0].frames[t].root_pos).norm() < 0.05);
  }
}

TEST_CASE("adv_weight zero ignores discriminator settings bitwise") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const std::vector<ReducedPoseSequence> pool = smooth_pool(skel, 2, 20, 40);

  HallucinatorConfig a = fast_config();
  a.k = 5;
  a.adv_weight = 0.0;
  HallucinatorConfig b = a;
  b.disc_lr = 0.5;
  b.disc_channels = 20;

  Hallucinator ha(skel, a, 21);
  Hallucinator hb(skel, b, 21);
  const auto hist_a = ha.train(pool, 77);
  const auto hist_b = hb.train(pool, 77);
  REQUIRE(hist_a.size() == hist_b.size());
  for (std::size_t i = 0; i < hist_a.size(); ++i) {
    CHECK(hist_a[i].recon == hist_b[i].recon);
    CHECK(hist_a[i].gen_adv == 0.0);
    CHECK(hist_a[i].disc_loss == 0.0);
  }

  const KeyframeSet keys = sample_keyframes(skel, a, pool, 16, KeyframeMode::within_clip, 3);
  const ReducedPoseSequence oa = ha.hallucinate_reduced(keys);
  const ReducedPoseSequence ob = hb.hallucinate_reduced(keys);
  REQUIRE(oa.length() == ob.length());
  for (int t = 0; t < oa.length(); ++t) CHECK(frame_eq(oa.frames[t], ob.frames[t]));
}

TEST_CASE("training is deterministic per seed") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const std::vector<ReducedPoseSequence> pool = smooth_pool(skel, 2, 24, 50);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  cfg.steps = 12;
  cfg.batch = 2;
  cfg.log_every = 4;

  Hallucinator h1(skel, cfg, 33);
  Hallucinator h2(skel, cfg, 33);
  const auto a = h1.train(pool, 55);
  const auto b = h2.train(pool, 55);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].step == b[i].step);
    CHECK(a[i].recon == b[i].recon);
    CHECK(a[i].gen_adv == b[i].gen_adv);
    CHECK(a[i].disc_loss == b[i].disc_loss);
    CHECK(a[i].disc_accuracy == b[i].disc_accuracy);
  }
  const KeyframeSet keys = sample_keyframes(skel, cfg, pool, 16, KeyframeMode::cross_clip, 5);
  const ReducedPoseSequence o1 = h1.hallucinate_reduced(keys);
  const ReducedPoseSequence o2 = h2.hallucinate_reduced(keys);
  for (int t = 0; t < o1.length(); ++t) CHECK(frame_eq(o1.frames[t], o2.frames[t]));

  Hallucinator h3(skel, cfg, 33);
  const auto c = h3.train(pool, 56);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].recon != c[i].recon) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("checkpoint round trip restores both networks") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const std::vector<ReducedPoseSequence> pool = smooth_pool(skel, 2, 20, 60);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  cfg.steps = 8;
  cfg.batch = 2;

  Hallucinator trained(skel, cfg, 41);
  trained.train(pool, 42);
  const auto dir = temp_path("hall_ckpt_test");
  trained.save(dir);

  Hallucinator fresh(skel, cfg, 999);
  fresh.load(dir);

  const KeyframeSet keys = sample_keyframes(skel, cfg, pool, 16, KeyframeMode::within_clip, 8);
  const ReducedPoseSequence a = trained.hallucinate_reduced(keys);
  const ReducedPoseSequence b = fresh.hallucinate_reduced(keys);
  for (int t = 0; t < a.length(); ++t) CHECK(frame_eq(a.frames[t], b.frames[t]));
  CHECK(trained.disc_accuracy(pool, pool, 5, 50) == fresh.disc_accuracy(pool, pool, 5, 50));
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical pools leave the discriminator at chance") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const std::vector<ReducedPoseSequence> pool = smooth_pool(skel, 6, 40, 70);
  HallucinatorConfig cfg = fast_config();
  cfg.k = 15;
  cfg.steps = 120;
  cfg.batch = 8;
  cfg.log_every = 40;

  Hallucinator hall(skel, cfg, 61);
  const auto history = hall.train(pool, 62);
  CHECK(history.back().step == cfg.steps - 1);

  // Same distribution on both sides: accuracy has expectation exactly 1/2
  // for any fixed classifier, whatever the training did.
  const double acc = hall.disc_accuracy(pool, pool, 63, 800);
  CHECK(acc > 0.44);
  CHECK(acc < 0.56);
}

TEST_CASE("constant-pose corpus keeps hallucinations near the pose") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  HallucinatorConfig cfg;
  cfg.k = 5;
  cfg.hidden = 32;
  cfg.adv_weight = 0.0;
  cfg.gen_lr = 1e-3;
  cfg.steps = 400;
  cfg.batch = 4;
  cfg.log_every = 100;

  std::vector<ReducedPoseSequence> pool;
  pool.push_back(constant_clip(skel, 20, 0.3, 0.4));
  pool.push_back(constant_clip(skel, 20, 0.3, -1.1));
  Hallucinator hall(skel, cfg, 71);
  hall.train(pool, 72);

  const KeyframeSet keys = sample_keyframes(skel, cfg, pool, 16, KeyframeMode::within_clip, 2);
  const ReducedPoseSequence out = hall.hallucinate_reduced(keys);
  const ReducedFrame& anchor = keys.anchors[0].pose;
  const double ten_deg = 10.0 * M_PI / 180.0;
  for (const auto& f : out.frames) {
    CHECK((f.angles - anchor.angles).cwiseAbs().maxCoeff() <= ten_deg);
    CHECK(motion::quat_angle(f.root_rot, anchor.root_rot) <= ten_deg);
    CHECK((f.root_pos - anchor.root_pos).norm() <= 0.10);
  }
}
