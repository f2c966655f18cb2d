#include "poseloop/synth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "poseloop/common/error.hpp"
#include "poseloop/common/rng.hpp"
#include "poseloop/io/motion_file.hpp"
#include "poseloop/motion/geometry.hpp"
#include "poseloop/motion/kinematics.hpp"

namespace poseloop::synth {

namespace h = motion::humanoid;
using motion::Quat;
using motion::Vec3;
using nlohmann::json;

namespace {

constexpr double kStandPelvisZ = 0.86;
constexpr double kPlantZ = 0.04;
constexpr double kSwingLift = 0.10;
constexpr double kStanceDuty = 0.6;

double smootherstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (u * (u * 6.0 - 15.0) + 10.0);
}

void require_humanoid(const SkeletonSpec& skel) {
  const bool ok = skel.joint_count() == h::count &&
                  skel.find_joint("l_hip") == h::l_hip &&
                  skel.find_joint("r_knee") == h::r_knee &&
                  skel.find_joint("l_wrist") == h::l_wrist &&
                  skel.find_joint("head") == h::head;
  if (!ok) throw DataError("synth recipes require the default humanoid skeleton");
}

struct BodyDims {
  Vec3 spine_off, neck_off, head_off;
  Vec3 hip_off_l, hip_off_r, sh_off_l, sh_off_r;
  double thigh = 0.0, shin = 0.0, uarm = 0.0, farm = 0.0;
};

BodyDims body_dims(const SkeletonSpec& skel) {
  BodyDims d;
  d.spine_off = skel.joints[h::spine].offset;
  d.neck_off = skel.joints[h::neck].offset;
  d.head_off = skel.joints[h::head].offset;
  d.hip_off_l = skel.joints[h::l_hip].offset;
  d.hip_off_r = skel.joints[h::r_hip].offset;
  d.sh_off_l = skel.joints[h::l_shoulder].offset;
  d.sh_off_r = skel.joints[h::r_shoulder].offset;
  d.thigh = skel.joints[h::l_knee].offset.norm();
  d.shin = skel.joints[h::l_ankle].offset.norm();
  d.uarm = skel.joints[h::l_elbow].offset.norm();
  d.farm = skel.joints[h::l_wrist].offset.norm();
  return d;
}

struct TwoBone {
  Vec3 mid, end;
};

// Analytic two-segment solve. The reached end is the target clamped into the
// annulus [|l1-l2|, l1+l2] so both segment lengths hold exactly.
TwoBone solve_two_bone(const Vec3& base, const Vec3& target, double l1, double l2,
                       const Vec3& pole) {
  const Vec3 delta = target - base;
  double dist = delta.norm();
  Vec3 dir = dist > 1e-12 ? Vec3(delta / dist) : Vec3(0.0, 0.0, -1.0);
  const double lo = std::abs(l1 - l2) + 1e-6;
  const double hi = l1 + l2 - 1e-6;
  dist = std::clamp(dist, lo, hi);
  const double a = (l1 * l1 - l2 * l2 + dist * dist) / (2.0 * dist);
  const double h2 = std::max(l1 * l1 - a * a, 0.0);
  Vec3 perp = pole - pole.dot(dir) * dir;
  if (perp.norm() < 1e-9) {
    perp = Vec3::UnitX() - dir.x() * dir;
    if (perp.norm() < 1e-9) perp = Vec3::UnitY() - dir.y() * dir;
  }
  TwoBone out;
  out.end = base + dist * dir;
  out.mid = base + a * dir + std::sqrt(h2) * perp.normalized();
  return out;
}

struct PathPoint {
  double x = 0.0, y = 0.0, heading = 0.0;
};

// Constant-curvature ground path, closed form so it extrapolates to t < 0.
PathPoint path_at(double t, double x0, double y0, double psi0, double v, double omega) {
  PathPoint p;
  p.heading = psi0 + omega * t;
  if (std::abs(omega) < 1e-9) {
    p.x = x0 + v * t * std::cos(psi0);
    p.y = y0 + v * t * std::sin(psi0);
  } else {
    p.x = x0 + v / omega * (std::sin(p.heading) - std::sin(psi0));
    p.y = y0 - v / omega * (std::cos(p.heading) - std::cos(psi0));
  }
  return p;
}

struct FramePose {
  Vec3 pelvis = Vec3::Zero();
  double yaw = 0.0;
  double lean = 0.0;  // torso pitch about the local left axis
  double nod = 0.0;
  Vec3 ankle_l = Vec3::Zero(), ankle_r = Vec3::Zero();
  Vec3 wrist_l = Vec3::Zero(), wrist_r = Vec3::Zero();
  Vec3 arm_pole_local = Vec3(-1.0, 0.0, -0.2);
};

// Assembles one frame of world-space joint positions from the compact pose
// description. Every bone length matches the skeleton by construction.
Eigen::MatrixXd assemble_frame(const BodyDims& d, const FramePose& fp) {
  Eigen::MatrixXd out(h::count, 3);
  const Quat rp = motion::yaw_quat(fp.yaw);
  const Quat rt = (rp * motion::quat_exp(Vec3(0.0, fp.lean, 0.0))).normalized();
  const Quat rh = (rt * motion::quat_exp(Vec3(0.0, fp.nod, 0.0))).normalized();

  const Vec3 pelvis = fp.pelvis;
  const Vec3 spine = pelvis + rp * d.spine_off;
  const Vec3 neck = spine + rt * d.neck_off;
  const Vec3 head = neck + rh * d.head_off;
  const Vec3 hip_l = pelvis + rp * d.hip_off_l;
  const Vec3 hip_r = pelvis + rp * d.hip_off_r;
  const Vec3 sh_l = spine + rt * d.sh_off_l;
  const Vec3 sh_r = spine + rt * d.sh_off_r;

  const Vec3 fwd = rp * Vec3::UnitX();
  const TwoBone leg_l = solve_two_bone(hip_l, fp.ankle_l, d.thigh, d.shin, fwd);
  const TwoBone leg_r = solve_two_bone(hip_r, fp.ankle_r, d.thigh, d.shin, fwd);
  const Vec3 arm_pole = rt * fp.arm_pole_local;
  const TwoBone arm_l = solve_two_bone(sh_l, fp.wrist_l, d.uarm, d.farm, arm_pole);
  const TwoBone arm_r = solve_two_bone(sh_r, fp.wrist_r, d.uarm, d.farm, arm_pole);

  out.row(h::pelvis) = pelvis;
  out.row(h::spine) = spine;
  out.row(h::neck) = neck;
  out.row(h::head) = head;
  out.row(h::l_hip) = hip_l;
  out.row(h::l_knee) = leg_l.mid;
  out.row(h::l_ankle) = leg_l.end;
  out.row(h::r_hip) = hip_r;
  out.row(h::r_knee) = leg_r.mid;
  out.row(h::r_ankle) = leg_r.end;
  out.row(h::l_shoulder) = sh_l;
  out.row(h::l_elbow) = arm_l.mid;
  out.row(h::l_wrist) = arm_l.end;
  out.row(h::r_shoulder) = sh_r;
  out.row(h::r_elbow) = arm_r.mid;
  out.row(h::r_wrist) = arm_r.end;
  return out;
}

Vec3 hang_wrist(const Vec3& shoulder, const Quat& rt, double side, double swing_x) {
  return shoulder + rt * Vec3(0.03 + swing_x, side * 0.06, -0.52);
}

MotionSequence3D gen_walk(const BodyDims& d, const SynthRecipe& r, double fps,
                          double max_path_length, Rng& rng) {
  const double v = r.speed;
  const double omega = r.turn_rate;
  const double duration = std::min(r.duration, max_path_length / v);
  const int frames = std::max(2, int(std::lround(duration * fps)));
  const double x0 = rng.uniform(-0.5, 0.5), y0 = rng.uniform(-0.5, 0.5);
  const double psi0 = rng.uniform(-M_PI, M_PI);
  const double cycle = std::clamp(0.45 / v, 0.4, 0.9);
  const double bob_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double lean0 = rng.uniform(0.05, 0.09);

  const auto plant = [&](double phase, double side, double n) -> Vec3 {
    const double t_mid = (n - phase + 0.5 * kStanceDuty) * cycle;
    const PathPoint p = path_at(t_mid, x0, y0, psi0, v, omega);
    const Vec3 lateral(-std::sin(p.heading), std::cos(p.heading), 0.0);
    return Vec3(p.x, p.y, kPlantZ) + side * 0.10 * lateral;
  };
  const auto ankle_at = [&](double t, double phase, double side) -> Vec3 {
    const double c_total = t / cycle + phase;
    const double n = std::floor(c_total);
    const double c = c_total - n;
    if (c < kStanceDuty) return plant(phase, side, n);
    const double s = (c - kStanceDuty) / (1.0 - kStanceDuty);
    const Vec3 from = plant(phase, side, n);
    const Vec3 to = plant(phase, side, n + 1.0);
    const double u = smootherstep((s - 0.15) / 0.70);
    Vec3 a = from + u * (to - from);
    a.z() = kPlantZ + kSwingLift * std::sin(M_PI * s);
    return a;
  };

  MotionSequence3D out;
  out.fps = fps;
  out.stage = motion::StageTag::ground_truth;
  out.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i / fps;
    const PathPoint p = path_at(t, x0, y0, psi0, v, omega);
    FramePose fp;
    fp.yaw = p.heading;
    fp.pelvis = Vec3(p.x, p.y,
                     kStandPelvisZ + 0.015 * std::sin(4.0 * M_PI * t / cycle + bob_phase));
    fp.lean = lean0 + 0.02 * std::sin(2.0 * M_PI * t / cycle + bob_phase);
    fp.nod = 0.04 * std::sin(2.0 * M_PI * t / cycle);
    fp.ankle_l = ankle_at(t, 0.0, 1.0);
    fp.ankle_r = ankle_at(t, 0.5, -1.0);
    const Quat rp = motion::yaw_quat(fp.yaw);
    const Quat rt = (rp * motion::quat_exp(Vec3(0.0, fp.lean, 0.0))).normalized();
    const Vec3 spine = fp.pelvis + rp * d.spine_off;
    const double swing = 0.10 * std::sin(2.0 * M_PI * t / cycle);
    fp.wrist_l = hang_wrist(spine + rt * d.sh_off_l, rt, 1.0, swing);
    fp.wrist_r = hang_wrist(spine + rt * d.sh_off_r, rt, -1.0, -swing);
    out.frames.push_back(assemble_frame(d, fp));
  }
  return out;
}

MotionSequence3D gen_stationary(const BodyDims& d, const SynthRecipe& r, double fps,
                                Rng& rng) {
  const int frames = std::max(2, int(std::lround(r.duration * fps)));
  const double x0 = rng.uniform(-0.5, 0.5), y0 = rng.uniform(-0.5, 0.5);
  const double psi0 = rng.uniform(-M_PI, M_PI);
  const double ph1 = rng.uniform(0.0, 2.0 * M_PI);
  const double ph2 = rng.uniform(0.0, 2.0 * M_PI);

  const Vec3 lateral(-std::sin(psi0), std::cos(psi0), 0.0);
  const Vec3 ankle_l = Vec3(x0, y0, kPlantZ) + 0.10 * lateral;
  const Vec3 ankle_r = Vec3(x0, y0, kPlantZ) - 0.10 * lateral;

  MotionSequence3D out;
  out.fps = fps;
  out.stage = motion::StageTag::ground_truth;
  out.frames.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i / fps;
    FramePose fp;
    fp.ankle_l = ankle_l;
    fp.ankle_r = ankle_r;
    fp.yaw = psi0;
    double px = x0, py = y0, pz = kStandPelvisZ;
    double swing_l = 0.0, swing_r = 0.0;
    double raise_l = 0.0, raise_r = 0.0;

    if (r.kind == RecipeKind::squat) {
      const double dip = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / 2.0 + ph1));
      pz = kStandPelvisZ - 0.25 * dip;
      fp.lean = 0.05 + 0.30 * dip;
      fp.nod = -0.10 * dip;
      raise_l = raise_r = dip;
    } else if (r.kind == RecipeKind::reach) {
      const double p = std::fmod(t / 2.0 + ph1 / (2.0 * M_PI), 1.0);
      const double w = p < 0.5 ? smootherstep(2.0 * p) : smootherstep(2.0 - 2.0 * p);
      fp.lean = 0.04 + 0.06 * w;
      fp.nod = 0.05 * std::sin(2.0 * M_PI * t / 3.1 + ph2);
      raise_r = w;
      swing_l = 0.02 * std::sin(2.0 * M_PI * t / 2.3 + ph2);
    } else {  // idle
      px += 0.02 * std::sin(2.0 * M_PI * t / 3.0 + ph1);
      py += 0.03 * std::sin(2.0 * M_PI * t / 4.3 + ph2);
      pz += 0.008 * std::sin(2.0 * M_PI * t / 2.7 + ph1);
      fp.yaw = psi0 + 0.05 * std::sin(2.0 * M_PI * t / 5.0 + ph2);
      fp.lean = 0.03 + 0.02 * std::sin(2.0 * M_PI * t / 3.7 + ph1);
      fp.nod = 0.05 * std::sin(2.0 * M_PI * t / 4.1 + ph2);
      swing_l = 0.02 * std::sin(2.0 * M_PI * t / 2.3 + ph1);
      swing_r = -swing_l;
    }

    fp.pelvis = Vec3(px, py, pz);
    const Quat rp = motion::yaw_quat(fp.yaw);
    const Quat rt = (rp * motion::quat_exp(Vec3(0.0, fp.lean, 0.0))).normalized();
    const Vec3 spine = fp.pelvis + rp * d.spine_off;
    const Vec3 sh_l = spine + rt * d.sh_off_l;
    const Vec3 sh_r = spine + rt * d.sh_off_r;
    // Raised arms blend from the hang posture toward a forward reach.
    const auto arm = [&](const Vec3& sh, double side, double swing, double raise) {
      const Vec3 hang(0.03 + swing, side * 0.06, -0.52);
      const Vec3 up(0.38, side * 0.04, 0.10);
      return Vec3(sh + rt * (hang + raise * (up - hang)));
    };
    fp.wrist_l = arm(sh_l, 1.0, swing_l, raise_l);
    fp.wrist_r = arm(sh_r, -1.0, swing_r, raise_r);
    out.frames.push_back(assemble_frame(d, fp));
  }
  return out;
}

void validate_recipe(const SynthRecipe& r) {
  if (!(r.duration > 0.0)) throw ConfigError("recipe duration must be positive");
  if (r.kind == RecipeKind::walk) {
    if (!(r.speed > 0.0) || r.speed > 1.3)
      throw ConfigError("walk speed must lie in (0, 1.3] m/s");
    if (std::abs(r.turn_rate) > 2.0)
      throw ConfigError("walk turn rate must lie in [-2, 2] rad/s");
  }
}

json recipe_to_json(const SynthRecipe& r) {
  return json{{"kind", std::string(kind_name(r.kind))},
              {"duration", r.duration},
              {"speed", r.speed},
              {"turn_rate", r.turn_rate}};
}

SynthRecipe recipe_from_json(const json& j) {
  SynthRecipe r;
  r.kind = kind_from_name(j.at("kind").get<std::string>());
  r.duration = j.at("duration").get<double>();
  r.speed = j.at("speed").get<double>();
  r.turn_rate = j.at("turn_rate").get<double>();
  return r;
}

json load_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + ": " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw DataError(std::string("malformed JSON in ") + what + ": " + path.string());
  return j;
}

}  // namespace

std::string_view kind_name(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::walk: return "walk";
    case RecipeKind::squat: return "squat";
    case RecipeKind::reach: return "reach";
    case RecipeKind::idle: return "idle";
  }
  throw ConfigError("unknown recipe kind");
}

RecipeKind kind_from_name(std::string_view name) {
  if (name == "walk") return RecipeKind::walk;
  if (name == "squat") return RecipeKind::squat;
  if (name == "reach") return RecipeKind::reach;
  if (name == "idle") return RecipeKind::idle;
  throw DataError("unknown recipe kind: " + std::string(name));
}

void validate_synth_config(const SynthConfig& config) {
  if (!(config.fps > 0.0)) throw ConfigError("synth fps must be positive");
  if (config.holdout_every < 2)
    throw ConfigError("holdout_every must be at least 2");
  if (!(config.max_path_length > 0.0))
    throw ConfigError("max_path_length must be positive");
  cam::validate_sampler_config(config.camera);
}

std::vector<SynthRecipe> default_recipes(int clips, std::uint64_t seed) {
  if (clips < 1) throw ConfigError("recipe count must be positive");
  Rng rng(derive_seed(seed, "synth.recipes"));
  std::vector<SynthRecipe> out;
  out.reserve(clips);
  for (int i = 0; i < clips; ++i) {
    SynthRecipe r;
    r.kind = static_cast<RecipeKind>(i % 4);
    r.duration = 4.0;
    if (r.kind == RecipeKind::walk) {
      r.speed = rng.uniform(0.5, 1.2);
      r.turn_rate = rng.uniform(-0.6, 0.6);
    }
    out.push_back(r);
  }
  return out;
}

MotionSequence3D generate_recipe(const SkeletonSpec& skel, const SynthRecipe& recipe,
                                 double fps, double max_path_length,
                                 std::uint64_t seed) {
  require_humanoid(skel);
  validate_recipe(recipe);
  if (!(fps > 0.0)) throw ConfigError("synth fps must be positive");
  if (!(max_path_length > 0.0)) throw ConfigError("max_path_length must be positive");
  const BodyDims d = body_dims(skel);
  Rng rng(seed);
  if (recipe.kind == RecipeKind::walk) return gen_walk(d, recipe, fps, max_path_length, rng);
  return gen_stationary(d, recipe, fps, rng);
}

SynthCorpus gen_synth_corpus(const SkeletonSpec& skel,
                             const std::vector<SynthRecipe>& recipes,
                             const SynthConfig& config, std::uint64_t seed) {
  validate_synth_config(config);
  if (recipes.empty()) throw DataError("no recipes given");
  const std::uint64_t motion_root = derive_seed(seed, "synth.motion");
  const std::uint64_t camera_root = derive_seed(seed, "synth.camera");

  SynthCorpus corpus;
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    SynthClip clip;
    clip.recipe = recipes[i];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "clip_%04zu_%s", i,
                  std::string(kind_name(recipes[i].kind)).c_str());
    clip.name = buf;
    clip.gt = generate_recipe(skel, recipes[i], config.fps, config.max_path_length,
                              derive_seed(motion_root, i));
    clip.camera = cam::sample_random_camera(config.camera, clip.gt,
                                            derive_seed(camera_root, i));
    clip.obs = cam::project_motion(clip.camera, clip.gt);
    const bool holdout = (i % std::size_t(config.holdout_every)) ==
                         std::size_t(config.holdout_every - 1);
    (holdout ? corpus.holdout : corpus.train).push_back(std::move(clip));
  }
  return corpus;
}

double visibility_fraction(const cam::Camera& camera, const MotionSequence3D& motion,
                           double half_extent) {
  if (motion.length() == 0) throw DataError("visibility of an empty motion");
  int visible = 0;
  for (const auto& frame : motion.frames) {
    bool ok = true;
    for (Eigen::Index j = 0; j < frame.rows() && ok; ++j) {
      const Vec3 pc = camera.to_camera(frame.row(j).transpose());
      if (pc.z() <= 0.1) {
        ok = false;
        break;
      }
      const double u = camera.focal * pc.x() / pc.z();
      const double v = camera.focal * pc.y() / pc.z();
      ok = std::abs(u) <= half_extent && std::abs(v) <= half_extent;
    }
    visible += ok ? 1 : 0;
  }
  return double(visible) / double(motion.length());
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus,
                  const SkeletonSpec& skel) {
  if (corpus.train.empty() && corpus.holdout.empty())
    throw DataError("refusing to write an empty corpus");
  const auto visible_dir = dir / "visible";
  const auto hidden_dir = dir / "hidden";
  std::filesystem::create_directories(visible_dir);
  std::filesystem::create_directories(hidden_dir);

  json clips = json::array();
  const auto write_clip = [&](const SynthClip& clip, bool holdout) {
    const auto obs_dir = holdout ? hidden_dir : visible_dir;
    io::save_motion_2d(obs_dir / (clip.name + ".p2d"), clip.obs, skel);
    io::save_motion_3d(hidden_dir / (clip.name + ".p3d"), clip.gt, skel);
    std::ofstream cam_out(hidden_dir / (clip.name + ".cam.json"));
    cam_out << cam::camera_to_json(clip.camera).dump(2) << "\n";
    if (!cam_out) throw DataError("failed to write camera for " + clip.name);
    clips.push_back(json{{"name", clip.name},
                         {"split", holdout ? "holdout" : "train"},
                         {"frames", clip.gt.length()},
                         {"recipe", recipe_to_json(clip.recipe)}});
  };
  for (const auto& clip : corpus.train) write_clip(clip, false);
  for (const auto& clip : corpus.holdout) write_clip(clip, true);

  const json manifest{{"format", "synth-corpus-v1"},
                      {"fps", corpus.train.empty() ? corpus.holdout.front().gt.fps
                                                   : corpus.train.front().gt.fps},
                      {"clips", std::move(clips)}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw DataError("failed to write corpus manifest");
}

std::vector<Pose2DSequence> read_visible(const std::filesystem::path& dir,
                                         const SkeletonSpec& skel) {
  const auto visible_dir = dir / "visible";
  if (!std::filesystem::is_directory(visible_dir))
    throw DataError("missing visible/ under " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(visible_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".p2d")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<Pose2DSequence> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(io::load_motion_2d(p, skel));
  return out;
}

SynthCorpus read_corpus(const std::filesystem::path& dir, const SkeletonSpec& skel) {
  const json manifest = load_json_file(dir / "manifest.json", "corpus manifest");
  if (manifest.value("format", "") != "synth-corpus-v1")
    throw DataError("unrecognized corpus manifest format");
  SynthCorpus corpus;
  for (const auto& row : manifest.at("clips")) {
    SynthClip clip;
    clip.name = row.at("name").get<std::string>();
    clip.recipe = recipe_from_json(row.at("recipe"));
    const bool holdout = row.at("split").get<std::string>() == "holdout";
    const auto obs_dir = dir / (holdout ? "hidden" : "visible");
    clip.obs = io::load_motion_2d(obs_dir / (clip.name + ".p2d"), skel);
    clip.gt = io::load_motion_3d(dir / "hidden" / (clip.name + ".p3d"), skel);
    clip.camera = cam::camera_from_json(
        load_json_file(dir / "hidden" / (clip.name + ".cam.json"), "camera"));
    (holdout ? corpus.holdout : corpus.train).push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace poseloop::synth
