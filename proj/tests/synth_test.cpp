#include <doctest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "poseloop/common/error.hpp"
#include "poseloop/evalkit/metrics.hpp"
#include "poseloop/io/motion_file.hpp"
#include "poseloop/motion/kinematics.hpp"
#include "poseloop/motion/skeleton.hpp"
#include "poseloop/synth/corpus.hpp"

using namespace poseloop;
namespace fs = std::filesystem;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("poseloop_synth_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

bool motion_eq(const motion::MotionSequence3D& a, const motion::MotionSequence3D& b) {
  if (a.length() != b.length() || a.fps != b.fps) return false;
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    if (a.frames[t] != b.frames[t]) return false;
  return true;
}

bool pose2d_eq(const motion::Pose2DSequence& a, const motion::Pose2DSequence& b) {
  if (a.length() != b.length() || a.fps != b.fps) return false;
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    if (a.frames[t] != b.frames[t]) return false;
  return true;
}

bool camera_eq(const cam::Camera& a, const cam::Camera& b) {
  return a.position == b.position && a.focal == b.focal &&
         a.orientation.coeffs() == b.orientation.coeffs();
}

double mean_horizontal_speed(const motion::MotionSequence3D& m) {
  double total = 0.0;
  for (std::size_t t = 1; t < m.frames.size(); ++t) {
    const double dx = m.frames[t](0, 0) - m.frames[t - 1](0, 0);
    const double dy = m.frames[t](0, 1) - m.frames[t - 1](0, 1);
    total += std::hypot(dx, dy);
  }
  return total * m.fps / double(m.frames.size() - 1);
}

}  // namespace

TEST_CASE("synth config and recipe validation") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthConfig config;
  CHECK_NOTHROW(synth::validate_synth_config(config));

  auto bad = config;
  bad.fps = 0.0;
  CHECK_THROWS_AS(synth::validate_synth_config(bad), ConfigError);
  bad = config;
  bad.holdout_every = 1;
  CHECK_THROWS_AS(synth::validate_synth_config(bad), ConfigError);
  bad = config;
  bad.max_path_length = 0.0;
  CHECK_THROWS_AS(synth::validate_synth_config(bad), ConfigError);
  bad = config;
  bad.camera.distance_lo = 7.0;  // empty range
  CHECK_THROWS_AS(synth::validate_synth_config(bad), ConfigError);

  synth::SynthRecipe walk;
  walk.kind = synth::RecipeKind::walk;
  walk.speed = 2.0;
  CHECK_THROWS_AS(synth::generate_recipe(skel, walk, 30.0, 2.4, 1), ConfigError);
  walk.speed = 1.0;
  walk.turn_rate = 3.0;
  CHECK_THROWS_AS(synth::generate_recipe(skel, walk, 30.0, 2.4, 1), ConfigError);
  walk.turn_rate = 0.0;
  walk.duration = 0.0;
  CHECK_THROWS_AS(synth::generate_recipe(skel, walk, 30.0, 2.4, 1), ConfigError);
  walk.duration = 4.0;
  CHECK_THROWS_AS(synth::generate_recipe(skel, walk, 0.0, 2.4, 1), ConfigError);
  CHECK_THROWS_AS(synth::generate_recipe(skel, walk, 30.0, 0.0, 1), ConfigError);

  motion::SkeletonSpec not_humanoid;
  CHECK_THROWS_AS(synth::generate_recipe(not_humanoid, walk, 30.0, 2.4, 1), DataError);

  CHECK_THROWS_AS(synth::default_recipes(0, 1), ConfigError);
  CHECK_THROWS_AS(synth::gen_synth_corpus(skel, {}, config, 1), DataError);

  CHECK(synth::kind_from_name("squat") == synth::RecipeKind::squat);
  CHECK_THROWS_AS(synth::kind_from_name("run"), DataError);
  CHECK(synth::kind_name(synth::RecipeKind::idle) == "idle");
}

TEST_CASE("default recipes cycle kinds and stay in bounds") {
  const auto recipes = synth::default_recipes(8, 42);
  REQUIRE(recipes.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(recipes[i].kind == static_cast<synth::RecipeKind>(i % 4));
    CHECK(recipes[i].duration == 4.0);
    if (recipes[i].kind == synth::RecipeKind::walk) {
      CHECK(recipes[i].speed >= 0.5);
      CHECK(recipes[i].speed <= 1.2);
      CHECK(std::abs(recipes[i].turn_rate) <= 0.6);
    }
  }
  const auto again = synth::default_recipes(8, 42);
  for (int i = 0; i < 8; ++i) {
    CHECK(again[i].speed == recipes[i].speed);
    CHECK(again[i].turn_rate == recipes[i].turn_rate);
  }
}

TEST_CASE("walk covers ground at the commanded speed") {
  const auto skel = motion::default_humanoid(70.0, 30.0);

  synth::SynthRecipe straight;
  straight.kind = synth::RecipeKind::walk;
  straight.speed = 0.6;
  straight.turn_rate = 0.0;
  const auto m1 = synth::generate_recipe(skel, straight, 30.0, 2.4, 7);
  REQUIRE(m1.length() == 120);  // 4 s, path 2.4 m exactly at the cap
  CHECK(mean_horizontal_speed(m1) == doctest::Approx(0.6).epsilon(0.05));

  synth::SynthRecipe turning;
  turning.kind = synth::RecipeKind::walk;
  turning.speed = 1.0;
  turning.turn_rate = 0.4;
  const auto m2 = synth::generate_recipe(skel, turning, 30.0, 2.4, 8);
  REQUIRE(m2.length() == 72);  // duration capped at 2.4 m of path
  CHECK(mean_horizontal_speed(m2) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(m2.all_finite());
  CHECK(m2.stage == motion::StageTag::ground_truth);
}

TEST_CASE("every recipe kind keeps feet clean and bones exact") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const auto feet = motion::foot_joints(skel);

  std::vector<synth::SynthRecipe> recipes(4);
  recipes[0].kind = synth::RecipeKind::walk;
  recipes[0].speed = 1.1;
  recipes[0].turn_rate = -0.5;
  recipes[1].kind = synth::RecipeKind::squat;
  recipes[2].kind = synth::RecipeKind::reach;
  recipes[3].kind = synth::RecipeKind::idle;

  for (std::size_t i = 0; i < recipes.size(); ++i) {
    CAPTURE(i);
    const auto m = synth::generate_recipe(skel, recipes[i], 30.0, 2.4, 100 + i);
    REQUIRE(m.length() >= 60);
    CHECK(m.all_finite());

    CHECK(evalkit::foot_skate_mm(m, feet) < 0.01);
    CHECK(evalkit::ground_penetration_cm(m, feet) == 0.0);

    for (const auto& frame : m.frames) {
      for (int j = 0; j < skel.joint_count(); ++j) {
        if (j == skel.root_index) continue;
        const int parent = skel.joints[j].parent;
        const double len =
            (frame.row(j) - frame.row(parent)).norm();
        CHECK(len == doctest::Approx(motion::bone_length(skel, j)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("squat dips and recovers") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthRecipe squat;
  squat.kind = synth::RecipeKind::squat;
  squat.duration = 4.0;
  const auto m = synth::generate_recipe(skel, squat, 30.0, 2.4, 5);
  double lo = 1e9, hi = -1e9;
  for (const auto& frame : m.frames) {
    lo = std::min(lo, frame(0, 2));
    hi = std::max(hi, frame(0, 2));
  }
  CHECK(lo < 0.66);
  CHECK(hi > 0.82);
}

TEST_CASE("synthetic poses are recoverable by inverse kinematics") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthRecipe walk;
  walk.kind = synth::RecipeKind::walk;
  walk.speed = 0.9;
  walk.turn_rate = 0.3;
  auto m = synth::generate_recipe(skel, walk, 30.0, 2.4, 17);
  m.frames.resize(40);  // keep the check fast
  const auto ik = motion::inverse_kinematics(skel, m);
  CHECK_FALSE(ik.unreachable_flag);
  const auto rebuilt = motion::forward_kinematics(skel, ik.reduced);
  CHECK(evalkit::mpjpe_mm(rebuilt, m, false) < 25.0);
}

TEST_CASE("corpus generation is deterministic and splits on cadence") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthConfig config;
  const auto recipes = synth::default_recipes(12, 3);
  const auto a = synth::gen_synth_corpus(skel, recipes, config, 11);
  const auto b = synth::gen_synth_corpus(skel, recipes, config, 11);
  const auto c = synth::gen_synth_corpus(skel, recipes, config, 12);

  REQUIRE(a.train.size() == 9);
  REQUIRE(a.holdout.size() == 3);
  CHECK(a.holdout[0].name == "clip_0003_idle");
  CHECK(a.holdout[1].name == "clip_0007_idle");
  CHECK(a.holdout[2].name == "clip_0011_idle");

  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].name == b.train[i].name);
    CHECK(motion_eq(a.train[i].gt, b.train[i].gt));
    CHECK(pose2d_eq(a.train[i].obs, b.train[i].obs));
    CHECK(camera_eq(a.train[i].camera, b.train[i].camera));
  }
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.size() && !any_diff; ++i)
    any_diff = !motion_eq(a.train[i].gt, c.train[i].gt) ||
               !camera_eq(a.train[i].camera, c.train[i].camera);
  CHECK(any_diff);

  for (const auto& clip : a.train) {
    CHECK(clip.obs.length() == clip.gt.length());
    CHECK(clip.obs.all_finite());
  }
}

TEST_CASE("sampled cameras keep the subject visible") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthConfig config;
  const auto recipes = synth::default_recipes(24, 91);
  const auto corpus = synth::gen_synth_corpus(skel, recipes, config, 91);
  const auto check_split = [&](const std::vector<synth::SynthClip>& clips) {
    for (const auto& clip : clips) {
      CAPTURE(clip.name);
      CHECK(synth::visibility_fraction(clip.camera, clip.gt) >= 0.99);
    }
  };
  check_split(corpus.train);
  check_split(corpus.holdout);

  motion::MotionSequence3D empty;
  CHECK_THROWS_AS(synth::visibility_fraction(corpus.train[0].camera, empty), DataError);
}

TEST_CASE("corpus round trips through disk and hides ground truth") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  synth::SynthConfig config;
  const auto recipes = synth::default_recipes(8, 21);
  const auto corpus = synth::gen_synth_corpus(skel, recipes, config, 21);
  const auto dir = temp_dir("roundtrip");
  synth::write_corpus(dir, corpus, skel);

  // The pipeline-visible directory holds 2D observation files and nothing else.
  std::set<std::string> visible_names;
  for (const auto& entry : fs::directory_iterator(dir / "visible")) {
    REQUIRE(entry.is_regular_file());
    REQUIRE(entry.path().extension() == ".p2d");
    const auto header = io::read_motion_header(entry.path());
    CHECK(header.at("representation").get<std::string>() == "pose-2d");
    visible_names.insert(entry.path().stem().string());
  }
  CHECK(visible_names.size() == corpus.train.size());
  for (const auto& clip : corpus.train) CHECK(visible_names.count(clip.name) == 1);
  for (const auto& clip : corpus.holdout) CHECK(visible_names.count(clip.name) == 0);

  for (const auto& clip : corpus.holdout) {
    CHECK(fs::exists(dir / "hidden" / (clip.name + ".p2d")));
    CHECK(fs::exists(dir / "hidden" / (clip.name + ".p3d")));
    CHECK(fs::exists(dir / "hidden" / (clip.name + ".cam.json")));
  }

  const auto visible = synth::read_visible(dir, skel);
  REQUIRE(visible.size() == corpus.train.size());
  for (std::size_t i = 0; i < visible.size(); ++i)
    CHECK(pose2d_eq(visible[i], corpus.train[i].obs));

  const auto back = synth::read_corpus(dir, skel);
  REQUIRE(back.train.size() == corpus.train.size());
  REQUIRE(back.holdout.size() == corpus.holdout.size());
  for (std::size_t i = 0; i < back.train.size(); ++i) {
    CHECK(back.train[i].name == corpus.train[i].name);
    CHECK(back.train[i].recipe.kind == corpus.train[i].recipe.kind);
    CHECK(back.train[i].recipe.speed == corpus.train[i].recipe.speed);
    CHECK(motion_eq(back.train[i].gt, corpus.train[i].gt));
    CHECK(pose2d_eq(back.train[i].obs, corpus.train[i].obs));
    CHECK(camera_eq(back.train[i].camera, corpus.train[i].camera));
  }
  for (std::size_t i = 0; i < back.holdout.size(); ++i) {
    CHECK(back.holdout[i].name == corpus.holdout[i].name);
    CHECK(motion_eq(back.holdout[i].gt, corpus.holdout[i].gt));
  }

  fs::remove_all(dir);
}

TEST_CASE("corpus io error paths") {
  const auto skel = motion::default_humanoid(70.0, 30.0);
  const auto dir = temp_dir("errors");
  CHECK_THROWS_AS(synth::read_visible(dir, skel), DataError);
  CHECK_THROWS_AS(synth::read_corpus(dir, skel), DataError);
  CHECK_THROWS_AS(synth::write_corpus(dir, synth::SynthCorpus{}, skel), DataError);

  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << "{broken";
  CHECK_THROWS_AS(synth::read_corpus(dir, skel), DataError);
  fs::remove_all(dir);
}
