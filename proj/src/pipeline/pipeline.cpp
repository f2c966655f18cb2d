#include "poseloop/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "poseloop/common/error.hpp"
#include "poseloop/common/rng.hpp"
#include "poseloop/evalkit/metrics.hpp"
#include "poseloop/io/motion_file.hpp"
#include "poseloop/motion/geometry.hpp"

namespace poseloop::pipeline {

namespace fs = std::filesystem;
using motion::Quat;
using motion::ReducedFrame;
using motion::StageTag;
using motion::Vec3;
using nlohmann::json;

namespace {

std::string round_dir_name(int round) {
  return round == 0 ? std::string("bootstrap") : "round_" + std::to_string(round);
}

std::string indexed(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu%s", prefix, i, ext);
  return buf;
}

void atomic_write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw DataError("failed to write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::uint32_t crc32_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for checksum: " + path.string());
  uLong crc = ::crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf), uInt(in.gcount()));
  return std::uint32_t(crc);
}

void save_pairs(const fs::path& dir, const std::vector<est::PairedSample>& pairs,
                const SkeletonSpec& skel) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string stem = indexed("pair", i, "");
    io::save_motion_2d(dir / (stem + ".p2d"), pairs[i].x, skel, pairs[i].X.stage);
    io::save_motion_3d(dir / (stem + ".p3d"), pairs[i].X, skel);
    std::ofstream cam_out(dir / (stem + ".cam.json"));
    cam_out << cam::camera_to_json(pairs[i].camera).dump(2) << "\n";
    if (!cam_out) throw DataError("failed to write camera for " + stem);
  }
}

std::vector<est::PairedSample> load_pairs(const fs::path& dir, int count,
                                          const SkeletonSpec& skel) {
  std::vector<est::PairedSample> pairs;
  pairs.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::string stem = indexed("pair", std::size_t(i), "");
    est::PairedSample pair;
    pair.x = io::load_motion_2d(dir / (stem + ".p2d"), skel);
    pair.X = io::load_motion_3d(dir / (stem + ".p3d"), skel);
    std::ifstream cam_in(dir / (stem + ".cam.json"));
    if (!cam_in) throw DataError("missing camera file for " + stem);
    pair.camera = cam::camera_from_json(json::parse(cam_in));
    est::validate_pair(pair);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double json_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nan("");
  return j.at(key).get<double>();
}

json eval_to_json(const EvalRecord& r) {
  return json{{"round", r.round},
              {"holdout_mpjpe_mm", double_or_null(r.holdout_mpjpe_mm)},
              {"imitate_terminations", r.imitate_terminations},
              {"ref_terminations", r.ref_terminations},
              {"hall_mpjpe_mm", double_or_null(r.hall_mpjpe_mm)},
              {"hall_lerp_mpjpe_mm", double_or_null(r.hall_lerp_mpjpe_mm)},
              {"hall_win_rate", double_or_null(r.hall_win_rate)}};
}

EvalRecord eval_from_json(const json& j) {
  EvalRecord r;
  r.round = j.at("round").get<int>();
  r.holdout_mpjpe_mm = json_double(j, "holdout_mpjpe_mm");
  r.imitate_terminations = j.value("imitate_terminations", -1);
  r.ref_terminations = j.value("ref_terminations", -1);
  r.hall_mpjpe_mm = json_double(j, "hall_mpjpe_mm");
  r.hall_lerp_mpjpe_mm = json_double(j, "hall_lerp_mpjpe_mm");
  r.hall_win_rate = json_double(j, "hall_win_rate");
  return r;
}

void log_stage(const std::string& stage, double seconds) {
  std::cerr << json{{"event", "stage"}, {"stage", stage}, {"seconds", seconds}}.dump()
            << "\n";
}

class StageTimer {
 public:
  explicit StageTimer(std::string stage)
      : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto end = std::chrono::steady_clock::now();
    log_stage(stage_, std::chrono::duration<double>(end - start_).count());
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

void validate_pipeline_config(const PipelineConfig& config) {
  if (config.rounds < 1) throw ConfigError("rounds must be at least 1");
  if (config.bootstrap_clips < 1) throw ConfigError("bootstrap_clips must be positive");
  if (!(config.bootstrap_seconds > 0.0))
    throw ConfigError("bootstrap_seconds must be positive");
  if (config.hallucinated_clips < 0)
    throw ConfigError("hallucinated_clips must be non-negative");
  if (config.hallucinated_frames < config.hallucinator.k + 1)
    throw ConfigError("hallucinated_frames must cover at least one keyframe gap");
  if (config.cameras_per_motion < 1)
    throw ConfigError("cameras_per_motion must be positive");
  if (!(config.camera_mix_ratio >= 0.0 && config.camera_mix_ratio <= 1.0))
    throw ConfigError("camera_mix_ratio must lie in [0, 1]");
  if (!(config.bootstrap_retain >= 0.0 && config.bootstrap_retain <= 1.0))
    throw ConfigError("bootstrap_retain must lie in [0, 1]");
  if (config.hallucinate_from_round < 1)
    throw ConfigError("hallucinate_from_round must be at least 1");
  hall::validate_hallucinator_config(config.hallucinator);
  cam::validate_sampler_config(config.camera);
  imit::validate_reward_config(config.imitator.reward);
}

std::vector<ReducedPoseSequence> make_bootstrap_references(const SkeletonSpec& skel,
                                                           const PipelineConfig& config,
                                                           std::uint64_t seed) {
  const double fps = config.imitator.sim.control_fps;
  const int frames = std::max(2, int(std::lround(config.bootstrap_seconds * fps)));
  const double max_turn = 45.0 * M_PI / 180.0 / fps;  // rad per frame
  const ReducedFrame rest = motion::rest_frame(skel);

  std::vector<ReducedPoseSequence> refs;
  refs.reserve(config.bootstrap_clips);
  for (int i = 0; i < config.bootstrap_clips; ++i) {
    Rng rng(derive_seed(seed, std::uint64_t(i)));
    const double speed = rng.uniform(0.5, 1.5);
    double psi = rng.uniform(-M_PI, M_PI);
    double x = rng.uniform(-0.5, 0.5), y = rng.uniform(-0.5, 0.5);

    ReducedPoseSequence ref;
    ref.fps = fps;
    ref.frames.reserve(frames);
    for (int t = 0; t < frames; ++t) {
      ReducedFrame f = rest;
      f.root_pos = Vec3(x, y, rest.root_pos.z());
      f.root_rot = motion::yaw_quat(psi);
      ref.frames.push_back(std::move(f));
      psi += rng.uniform(-max_turn, max_turn);
      x += speed / fps * std::cos(psi);
      y += speed / fps * std::sin(psi);
    }
    refs.push_back(std::move(ref));
  }
  return refs;
}

MotionSequence3D to_world_estimate(const SkeletonSpec& skel,
                                   const MotionSequence3D& estimate) {
  if (estimate.length() == 0) throw DataError("empty estimate");
  const int J = skel.joint_count();
  if (estimate.joint_count() != J) throw DataError("estimate joint count mismatch");
  const int spine_like = skel.find_joint("neck") >= 0 ? skel.find_joint("neck") : 1;
  const int root = skel.root_index;

  // Mean body-up axis across the clip decides the world up direction.
  Vec3 up = Vec3::Zero();
  for (const auto& frame : estimate.frames)
    up += (frame.row(spine_like) - frame.row(root)).transpose();
  Quat fix = Quat::Identity();
  if (up.norm() > 1e-9) fix = motion::rotation_between(Vec3(up.normalized()), Vec3::UnitZ());

  MotionSequence3D out;
  out.fps = estimate.fps;
  out.stage = estimate.stage;
  out.frames.reserve(estimate.frames.size());
  for (const auto& frame : estimate.frames) {
    Eigen::MatrixXd rotated(J, 3);
    for (int j = 0; j < J; ++j) rotated.row(j) = (fix * Vec3(frame.row(j))).transpose();
    // Retarget every bone to its exact skeleton length, keeping directions.
    Eigen::MatrixXd fixed(J, 3);
    fixed.row(root) = rotated.row(root);
    for (int j = 0; j < J; ++j) {
      if (j == root) continue;
      const int parent = skel.joints[j].parent;
      Vec3 dir = (rotated.row(j) - rotated.row(parent)).transpose();
      const double n = dir.norm();
      if (n > 1e-9) {
        dir /= n;
      } else {
        const Vec3 off = skel.joints[j].offset;
        dir = off.norm() > 1e-9 ? Vec3(off.normalized()) : Vec3::UnitZ();
      }
      fixed.row(j) = fixed.row(parent) + motion::bone_length(skel, j) * dir.transpose();
    }
    out.frames.push_back(std::move(fixed));
  }

  // Ground the clip: the 5th percentile of per-frame minimum foot height
  // lands at a nominal ankle clearance.
  const auto feet = motion::foot_joints(skel);
  if (!feet.empty()) {
    std::vector<double> lows;
    lows.reserve(out.frames.size());
    for (const auto& frame : out.frames) {
      double lo = frame(feet[0], 2);
      for (int f : feet) lo = std::min(lo, frame(f, 2));
      lows.push_back(lo);
    }
    std::sort(lows.begin(), lows.end());
    const double ground = lows[std::size_t(0.05 * double(lows.size() - 1))];
    const double shift = 0.05 - ground;
    for (auto& frame : out.frames) frame.col(2).array() += shift;
  }
  return out;
}

std::vector<est::PairedSample> build_pairs(const std::vector<MotionSequence3D>& motions,
                                           const cam::CameraGan* gan,
                                           const cam::CameraSamplerConfig& ranges,
                                           int cameras_per_motion, double random_ratio,
                                           std::uint64_t seed) {
  if (motions.empty()) throw DataError("build_pairs: no motions");
  if (cameras_per_motion < 1) throw ConfigError("cameras_per_motion must be positive");
  if (!(random_ratio >= 0.0 && random_ratio <= 1.0))
    throw ConfigError("camera mix ratio must lie in [0, 1]");
  const double gan_prob = 1.0 - random_ratio;

  std::vector<est::PairedSample> pairs;
  pairs.reserve(motions.size() * std::size_t(cameras_per_motion));
  for (std::size_t i = 0; i < motions.size(); ++i) {
    const auto& m = motions[i];
    if (m.stage != StageTag::imitated && m.stage != StageTag::refined)
      throw DataError("build_pairs: motion " + std::to_string(i) +
                      " is not physically refined (plausibility gate)");
    const std::uint64_t mseed = derive_seed(seed, i);
    for (int c = 0; c < cameras_per_motion; ++c) {
      est::PairedSample pair;
      pair.camera = cam::sample_camera_mixed(gan, ranges, m, gan_prob,
                                             derive_seed(mseed, std::uint64_t(c)));
      pair.x = cam::project_motion(pair.camera, m);
      pair.X = m;
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

ReducedPoseSequence lerp_inbetween(const SkeletonSpec& skel, const hall::KeyframeSet& keys) {
  hall::validate_keyframes(skel, keys, 1 << 20);
  ReducedPoseSequence out;
  out.fps = keys.fps;
  out.frames.resize(std::size_t(keys.anchors.back().index) + 1);
  for (const auto& a : keys.anchors) out.frames[std::size_t(a.index)] = a.pose;
  for (std::size_t g = 0; g + 1 < keys.anchors.size(); ++g) {
    const auto& a = keys.anchors[g];
    const auto& b = keys.anchors[g + 1];
    for (int t = a.index + 1; t < b.index; ++t) {
      const double alpha = double(t - a.index) / double(b.index - a.index);
      ReducedFrame f;
      f.root_pos = (1.0 - alpha) * a.pose.root_pos + alpha * b.pose.root_pos;
      f.root_rot = a.pose.root_rot.slerp(alpha, b.pose.root_rot).normalized();
      f.angles = (1.0 - alpha) * a.pose.angles + alpha * b.pose.angles;
      out.frames[std::size_t(t)] = std::move(f);
    }
  }
  return out;
}

double estimator_holdout_mpjpe(const est::Estimator& estimator,
                               const std::vector<HoldoutClip>& holdout) {
  if (holdout.empty()) throw DataError("empty hold-out set");
  double total = 0.0;
  for (const auto& clip : holdout) {
    const MotionSequence3D pred = estimator.estimate(clip.obs);
    const MotionSequence3D gt_cam = cam::to_camera_frame(clip.camera, clip.gt);
    total += evalkit::mpjpe_mm(pred, gt_cam, true);
  }
  return total / double(holdout.size());
}

InbetweenEval eval_inbetweening(const hall::Hallucinator& hallucinator,
                                const std::vector<ReducedPoseSequence>& holdout_reduced) {
  const auto& skel = hallucinator.skeleton();
  const int k = hallucinator.config().k;
  InbetweenEval out;
  double err_sum = 0.0, lerp_sum = 0.0;
  std::size_t err_n = 0;
  int wins = 0;

  for (std::size_t ci = 0; ci < holdout_reduced.size(); ++ci) {
    const auto& clip = holdout_reduced[ci];
    if (int(clip.frames.size()) < k + 1) continue;
    const std::vector<ReducedPoseSequence> pool{clip};
    const auto keys = hall::sample_keyframes(skel, hallucinator.config(), pool,
                                             int(clip.frames.size()),
                                             hall::KeyframeMode::within_clip,
                                             derive_seed(9000, ci));
    const auto hall_red = hallucinator.hallucinate_reduced(keys);
    const auto lerp_red = lerp_inbetween(skel, keys);
    const auto hall_fk = motion::forward_kinematics(skel, hall_red);
    const auto lerp_fk = motion::forward_kinematics(skel, lerp_red);
    ReducedPoseSequence gt_red;
    gt_red.fps = clip.fps;
    gt_red.frames.assign(clip.frames.begin(),
                         clip.frames.begin() + hall_red.frames.size());
    const auto gt_fk = motion::forward_kinematics(skel, gt_red);

    for (std::size_t g = 0; g + 1 < keys.anchors.size(); ++g) {
      const int a = keys.anchors[g].index, b = keys.anchors[g + 1].index;
      if (b - a < 2) continue;
      double h_err = 0.0, l_err = 0.0;
      std::size_t n = 0;
      for (int t = a + 1; t < b; ++t) {
        for (int j = 0; j < skel.joint_count(); ++j) {
          h_err += (hall_fk.frames[t].row(j) - gt_fk.frames[t].row(j)).norm();
          l_err += (lerp_fk.frames[t].row(j) - gt_fk.frames[t].row(j)).norm();
          ++n;
        }
      }
      h_err = h_err / double(n) * 1000.0;
      l_err = l_err / double(n) * 1000.0;
      err_sum += h_err * double(n);
      lerp_sum += l_err * double(n);
      err_n += n;
      wins += h_err < l_err ? 1 : 0;
      ++out.gaps;
    }
  }
  if (out.gaps == 0) throw DataError("no usable hold-out gaps for in-betweening");
  out.mpjpe_mm = err_sum / double(err_n);
  out.lerp_mpjpe_mm = lerp_sum / double(err_n);
  out.win_rate = double(wins) / double(out.gaps);
  return out;
}

Pipeline::Pipeline(const SkeletonSpec& skel, const PipelineConfig& config,
                   const fs::path& run_dir)
    : skel_(skel), config_(config), run_dir_(run_dir) {
  validate_pipeline_config(config_);
  fs::create_directories(run_dir_);
}

void Pipeline::ensure_modules() {
  if (!est_)
    est_ = std::make_unique<est::Estimator>(skel_.joint_count(), config_.estimator,
                                            derive_seed(config_.master_seed, "pipe.est"));
  if (!imit_)
    imit_ = std::make_unique<imit::Imitator>(skel_, config_.imitator,
                                             derive_seed(config_.master_seed, "pipe.imit"));
}

void Pipeline::load_modules(const RoundState& state) {
  ensure_modules();
  if (!state.estimator_ckpt.empty()) est_->load(run_dir_ / state.estimator_ckpt);
  if (!state.imitator_ckpt.empty()) imit_->load(run_dir_ / state.imitator_ckpt);
  if (!state.hallucinator_ckpt.empty()) {
    if (!hall_)
      hall_ = std::make_unique<hall::Hallucinator>(
          skel_, config_.hallucinator, derive_seed(config_.master_seed, "pipe.hall"));
    hall_->load(run_dir_ / state.hallucinator_ckpt);
  }
  if (!state.camera_gan_ckpt.empty()) {
    if (!gan_)
      gan_ = std::make_unique<cam::CameraGan>(
          skel_, config_.camera_gan, derive_seed(config_.master_seed, "pipe.gan"));
    gan_->load(run_dir_ / state.camera_gan_ckpt);
  }
}

const est::Estimator& Pipeline::estimator() const {
  if (!est_) throw ConfigError("estimator not initialized; run or resume first");
  return *est_;
}

const imit::Imitator& Pipeline::imitator() const {
  if (!imit_) throw ConfigError("imitator not initialized; run or resume first");
  return *imit_;
}

const hall::Hallucinator& Pipeline::hallucinator() const {
  if (!hall_) throw ConfigError("hallucinator not trained yet");
  return *hall_;
}

std::vector<ReducedPoseSequence> Pipeline::imitated_reduced(
    const std::vector<MotionSequence3D>& motions) const {
  std::vector<ReducedPoseSequence> out;
  out.reserve(motions.size());
  for (const auto& m : motions) out.push_back(motion::inverse_kinematics(skel_, m).reduced);
  return out;
}

RoundState Pipeline::bootstrap() {
  const std::uint64_t b = derive_seed(config_.master_seed, "pipe.bootstrap");
  const fs::path dir = run_dir_ / "bootstrap";
  fs::create_directories(dir / "refs");
  fs::create_directories(dir / "rollouts");
  ensure_modules();

  const auto refs =
      make_bootstrap_references(skel_, config_, derive_seed(b, "refs"));
  for (std::size_t i = 0; i < refs.size(); ++i)
    io::save_motion_reduced(dir / "refs" / indexed("ref", i, ".mred"), refs[i],
                            StageTag::ground_truth, skel_);

  {
    StageTimer timer("bootstrap.imitator");
    imit_->train(refs, derive_seed(b, "imit.train"));
  }

  std::vector<MotionSequence3D> rollouts;
  rollouts.reserve(refs.size());
  int terminations = 0;
  {
    StageTimer timer("bootstrap.rollouts");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      auto res = imit_->imitate_reduced(refs[i], StageTag::imitated);
      terminations += res.terminations;
      io::save_motion_3d(dir / "rollouts" / indexed("roll", i, ".p3d"), res.motion, skel_);
      rollouts.push_back(std::move(res.motion));
    }
  }

  auto pairs = build_pairs(rollouts, nullptr, config_.camera, config_.cameras_per_motion,
                           1.0, derive_seed(b, "pairs"));
  {
    StageTimer timer("bootstrap.estimator");
    est_->train(pairs, derive_seed(b, "est.train"));
  }

  save_pairs(dir / "pairs", pairs, skel_);
  est_->save(dir / "estimator.ckpt");
  imit_->save(dir / "imitator");

  RoundState state;
  state.round = 0;
  state.estimator_ckpt = "bootstrap/estimator.ckpt";
  state.imitator_ckpt = "bootstrap/imitator";
  state.bootstrap_pairs = pairs;
  state.current_pairs = std::move(pairs);
  EvalRecord rec;
  rec.round = 0;
  rec.imitate_terminations = terminations;
  state.history.push_back(rec);
  persist_state(state, dir);
  return state;
}

RoundState Pipeline::run_round(const RoundState& state,
                               const std::vector<Pose2DSequence>& pool2d) {
  if (state.round < 0) throw ConfigError("run_round requires a bootstrapped state");
  if (pool2d.empty()) throw DataError("run_round: empty 2D pool");
  const int n = state.round + 1;
  const std::uint64_t r =
      derive_seed(derive_seed(config_.master_seed, "pipe.round"), std::uint64_t(n));
  const fs::path dir = run_dir_ / round_dir_name(n);
  fs::create_directories(dir / "estimates");
  fs::create_directories(dir / "imitated");

  load_modules(state);
  if (config_.reset_imitator)
    imit_ = std::make_unique<imit::Imitator>(skel_, config_.imitator,
                                             derive_seed(config_.master_seed, "pipe.imit"));

  // Estimate and lift to world candidates.
  std::vector<ReducedPoseSequence> refs;
  refs.reserve(pool2d.size());
  {
    StageTimer timer(round_dir_name(n) + ".estimate_ik");
    for (std::size_t i = 0; i < pool2d.size(); ++i) {
      const auto raw = est_->estimate(pool2d[i]);
      const auto world = to_world_estimate(skel_, raw);
      io::save_motion_3d(dir / "estimates" / indexed("est", i, ".p3d"), world, skel_);
      refs.push_back(motion::inverse_kinematics(skel_, world).reduced);
    }
  }

  {
    StageTimer timer(round_dir_name(n) + ".imitator_train");
    imit_->train(refs, derive_seed(r, "imit.train"));
  }

  std::vector<MotionSequence3D> motions;
  motions.reserve(refs.size());
  int imitate_terminations = 0;
  {
    StageTimer timer(round_dir_name(n) + ".imitate");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      auto res = imit_->imitate_reduced(refs[i], StageTag::imitated);
      imitate_terminations += res.terminations;
      io::save_motion_3d(dir / "imitated" / indexed("imi", i, ".p3d"), res.motion, skel_);
      motions.push_back(std::move(res.motion));
    }
  }

  if (n == 1) {
    fs::create_directories(dir / "refs");
    for (std::size_t i = 0; i < refs.size(); ++i)
      io::save_motion_reduced(dir / "refs" / indexed("ref", i, ".mred"), refs[i],
                              StageTag::raw_estimate, skel_);
    fixed_refs_ = refs;
  }

  // The hallucinator trains every round so checkpoints can be compared, but
  // its clips only augment the pool from hallucinate_from_round on.
  auto hall_pool = imitated_reduced(motions);
  if (!hall_)
    hall_ = std::make_unique<hall::Hallucinator>(
        skel_, config_.hallucinator, derive_seed(config_.master_seed, "pipe.hall"));
  {
    StageTimer timer(round_dir_name(n) + ".hallucinator_train");
    hall_->train(hall_pool, derive_seed(r, "hall.train"));
  }

  if (n >= config_.hallucinate_from_round && config_.hallucinated_clips > 0) {
    StageTimer timer(round_dir_name(n) + ".hallucinate");
    fs::create_directories(dir / "hallucinated");
    fs::create_directories(dir / "refined");
    const std::uint64_t kseed = derive_seed(r, "hall.keys");
    for (int c = 0; c < config_.hallucinated_clips; ++c) {
      const auto keys = hall::sample_keyframes(skel_, config_.hallucinator, hall_pool,
                                               config_.hallucinated_frames,
                                               hall::KeyframeMode::cross_clip,
                                               derive_seed(kseed, std::uint64_t(c)));
      const auto hall_red = hall_->hallucinate_reduced(keys);
      auto hall_fk = motion::forward_kinematics(skel_, hall_red);
      hall_fk.stage = StageTag::hallucinated;
      io::save_motion_3d(dir / "hallucinated" / indexed("hal", std::size_t(c), ".p3d"),
                         hall_fk, skel_);
      auto res = imit_->imitate_reduced(hall_red, StageTag::refined);
      io::save_motion_3d(dir / "refined" / indexed("ref", std::size_t(c), ".p3d"),
                         res.motion, skel_);
      motions.push_back(std::move(res.motion));
    }
  }

  const bool use_gan = config_.camera_mix_ratio < 1.0 && n >= 2;
  if (use_gan) {
    if (!gan_)
      gan_ = std::make_unique<cam::CameraGan>(
          skel_, config_.camera_gan, derive_seed(config_.master_seed, "pipe.gan"));
    StageTimer timer(round_dir_name(n) + ".camera_gan");
    gan_->train(pool2d, motions, derive_seed(r, "gan.train"));
  }

  auto new_pairs = build_pairs(motions, use_gan ? gan_.get() : nullptr, config_.camera,
                               config_.cameras_per_motion, config_.camera_mix_ratio,
                               derive_seed(r, "pairs"));
  if (config_.bootstrap_retain > 0.0 && !state.bootstrap_pairs.empty()) {
    const auto stride =
        std::size_t(std::max<long long>(1, std::llround(1.0 / config_.bootstrap_retain)));
    for (std::size_t i = 0; i < state.bootstrap_pairs.size(); i += stride)
      new_pairs.push_back(state.bootstrap_pairs[i]);
  }

  {
    StageTimer timer(round_dir_name(n) + ".estimator_train");
    est_->train(new_pairs, derive_seed(r, "est.train"));
  }

  save_pairs(dir / "pairs", new_pairs, skel_);
  est_->save(dir / "estimator.ckpt");
  imit_->save(dir / "imitator");
  hall_->save(dir / "hallucinator");
  if (use_gan) gan_->save(dir / "camera_gan");

  RoundState next;
  next.round = n;
  next.estimator_ckpt = round_dir_name(n) + "/estimator.ckpt";
  next.imitator_ckpt = round_dir_name(n) + "/imitator";
  next.hallucinator_ckpt = round_dir_name(n) + "/hallucinator";
  next.camera_gan_ckpt = use_gan ? round_dir_name(n) + "/camera_gan" : state.camera_gan_ckpt;
  next.bootstrap_pairs = state.bootstrap_pairs;
  next.current_pairs = std::move(new_pairs);
  next.history = state.history;
  EvalRecord rec;
  rec.round = n;
  rec.imitate_terminations = imitate_terminations;
  if (n == 1) rec.ref_terminations = imitate_terminations;
  next.history.push_back(rec);
  persist_state(next, dir);
  return next;
}

RoundState Pipeline::run_full(const std::vector<Pose2DSequence>& pool2d,
                              const std::vector<HoldoutClip>* holdout) {
  RoundState state;
  if (fs::exists(run_dir_ / "state.json")) {
    state = resume();
  } else {
    state = bootstrap();
  }

  std::vector<ReducedPoseSequence> holdout_reduced;
  const auto eval_round = [&](RoundState& st) {
    if (!holdout) return;
    EvalRecord* rec = nullptr;
    for (auto& h : st.history)
      if (h.round == st.round) rec = &h;
    if (!rec) return;
    bool changed = false;
    if (std::isnan(rec->holdout_mpjpe_mm)) {
      rec->holdout_mpjpe_mm = estimator_holdout_mpjpe(*est_, *holdout);
      changed = true;
    }
    if (st.round >= 2 && rec->ref_terminations < 0 && !fixed_refs_.empty()) {
      int terms = 0;
      for (const auto& ref : fixed_refs_)
        terms += imit_->imitate_reduced(ref, StageTag::imitated).terminations;
      rec->ref_terminations = terms;
      changed = true;
    }
    if (st.round >= 1 && hall_ && std::isnan(rec->hall_mpjpe_mm)) {
      if (holdout_reduced.empty())
        for (const auto& clip : *holdout)
          holdout_reduced.push_back(motion::inverse_kinematics(skel_, clip.gt).reduced);
      const auto ev = eval_inbetweening(*hall_, holdout_reduced);
      rec->hall_mpjpe_mm = ev.mpjpe_mm;
      rec->hall_lerp_mpjpe_mm = ev.lerp_mpjpe_mm;
      rec->hall_win_rate = ev.win_rate;
      changed = true;
    }
    if (changed) persist_state(st, run_dir_ / round_dir_name(st.round));
  };

  eval_round(state);
  while (state.round + 1 < config_.rounds) {
    state = run_round(state, pool2d);
    eval_round(state);
  }
  return state;
}

RoundState Pipeline::load_state_file(const fs::path& path) const {
  std::ifstream in(path);
  if (!in) throw DataError("missing pipeline state: " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed pipeline state: " + path.string());

  RoundState state;
  state.round = j.at("round").get<int>();
  state.estimator_ckpt = j.value("estimator_ckpt", "");
  state.imitator_ckpt = j.value("imitator_ckpt", "");
  state.hallucinator_ckpt = j.value("hallucinator_ckpt", "");
  state.camera_gan_ckpt = j.value("camera_gan_ckpt", "");
  for (const auto& row : j.at("history")) state.history.push_back(eval_from_json(row));

  const int nb = j.at("bootstrap_pairs").get<int>();
  const int nc = j.at("current_pairs").get<int>();
  const std::string cdir = j.at("current_dir").get<std::string>();
  state.bootstrap_pairs = load_pairs(run_dir_ / "bootstrap" / "pairs", nb, skel_);
  state.current_pairs = cdir == "bootstrap/pairs"
                            ? state.bootstrap_pairs
                            : load_pairs(run_dir_ / cdir, nc, skel_);
  return state;
}

RoundState Pipeline::resume(int round_index) {
  const fs::path path = round_index < 0
                            ? run_dir_ / "state.json"
                            : run_dir_ / round_dir_name(round_index) / "state.json";
  RoundState state = load_state_file(path);
  load_modules(state);
  fixed_refs_.clear();
  const fs::path refs_dir = run_dir_ / "round_1" / "refs";
  if (state.round >= 1 && fs::is_directory(refs_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(refs_dir))
      if (entry.path().extension() == ".mred") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      fixed_refs_.push_back(io::load_motion_reduced(f, skel_).sequence);
  }
  return state;
}

void Pipeline::persist_state(const RoundState& state, const fs::path& snapshot_dir) {
  json j;
  j["format"] = "poseloop-run-v1";
  j["master_seed"] = config_.master_seed;
  j["round"] = state.round;
  j["estimator_ckpt"] = state.estimator_ckpt;
  j["imitator_ckpt"] = state.imitator_ckpt;
  j["hallucinator_ckpt"] = state.hallucinator_ckpt;
  j["camera_gan_ckpt"] = state.camera_gan_ckpt;
  j["bootstrap_pairs"] = int(state.bootstrap_pairs.size());
  j["current_pairs"] = int(state.current_pairs.size());
  j["current_dir"] =
      state.round == 0 ? "bootstrap/pairs" : round_dir_name(state.round) + "/pairs";
  json hist = json::array();
  for (const auto& rec : state.history) hist.push_back(eval_to_json(rec));
  j["history"] = std::move(hist);

  // Checksums over every artifact of this round, sorted for stable bytes.
  std::map<std::string, std::uint32_t> sums;
  for (const auto& entry : fs::recursive_directory_iterator(snapshot_dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "state.json") continue;
    sums[fs::relative(entry.path(), run_dir_).generic_string()] = crc32_file(entry.path());
  }
  json sums_json = json::object();
  for (const auto& [rel, crc] : sums) sums_json[rel] = crc;
  j["checksums"] = std::move(sums_json);

  const std::string text = j.dump(2) + "\n";
  atomic_write_text(snapshot_dir / "state.json", text);
  atomic_write_text(run_dir_ / "state.json", text);
}

}  // namespace poseloop::pipeline
