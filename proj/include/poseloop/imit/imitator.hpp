#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "poseloop/imit/featurize.hpp"
#include "poseloop/imit/reward.hpp"
#include "poseloop/neural/adam.hpp"
#include "poseloop/phys/sim.hpp"
#include "poseloop/rl/gae.hpp"
#include "poseloop/rl/ppo.hpp"

namespace poseloop::imit {

struct ImitatorConfig {
  rl::PpoConfig ppo;
  RewardConfig reward;
  phys::SimConfig sim;
  int hidden = 256;
  int iterations = 40;
  double init_log_std = -1.0;
  int workers = 0;  // 0 = default_workers()
};

struct IterationStats {
  int iteration = 0;
  double mean_reward = 0.0;  // mean per-episode return
  double mean_length = 0.0;  // control steps per episode
  int terminations = 0;      // episodes ended by head-fall or sim blowup
  int episodes = 0;
  int transitions = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct ImitateResult {
  motion::MotionSequence3D motion;
  int terminations = 0;
  double ik_residual = 0.0;  // max FK-vs-input residual of the IK pass (m)
};

// Per-clip caches shared by every rollout episode on that clip.
struct ClipCache {
  std::vector<MotionCharacteristics> chars;
  Eigen::VectorXd head_z;  // reference head height per frame
  Mat phi;                 // PhiEncoder::kChannels x T
};

// True iff the sim head is 0.3 m below the reference head at frame t, or t is
// the final reference frame.
bool is_terminated(const SkeletonSpec& skel, const FrameState& sim,
                   const ReducedPoseSequence& reference, int t);

// PPO-trained tracking policy over the physics simulator. Action layout:
// [PD targets (non-root dofs), residual force / bound, residual torque / bound].
class Imitator {
 public:
  Imitator(const SkeletonSpec& skel, const ImitatorConfig& config, std::uint64_t seed);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  ClipCache build_cache(const ReducedPoseSequence& ref) const;

  // One batch of episodes with GAE advantages; deterministic given seed, and
  // independent of the worker count.
  rl::TransitionBatch collect_rollouts(const std::vector<ReducedPoseSequence>& pool,
                                       const std::vector<ClipCache>& caches,
                                       std::uint64_t seed, IterationStats& stats) const;

  // config.iterations x (collect + ppo_update). Optimizer state is rebuilt at
  // entry, so re-running from the same parameters reproduces byte-identical
  // results. Throws DataError on an empty pool.
  std::vector<IterationStats> train(const std::vector<ReducedPoseSequence>& pool,
                                    std::uint64_t seed);

  // Mean-action rollout tracking the reference; restarts from a T-pose at the
  // failure frame on early termination and counts restarts.
  ImitateResult imitate(const motion::MotionSequence3D& reference,
                        motion::StageTag stage) const;
  ImitateResult imitate_reduced(const ReducedPoseSequence& reference,
                                motion::StageTag stage, double ik_residual = 0.0) const;

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

  const ImitatorConfig& config() const { return config_; }
  const SkeletonSpec& skeleton() const { return *skel_; }
  const PhiEncoder& phi_encoder() const { return *phi_; }

 private:
  phys::Action to_action(const Eigen::VectorXd& a) const;
  Vec6 applied_eta(const phys::Action& action) const;
  FrameState initial_state(const motion::ReducedFrame& ref0) const;
  double head_height(const MotionCharacteristics& c) const;

  const SkeletonSpec* skel_;
  ImitatorConfig config_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  int head_ee_slot_ = 0;  // index of the head inside the end-effector list

  neural::ParamStore pstore_, vstore_;
  std::unique_ptr<PhiEncoder> phi_;
  std::unique_ptr<rl::MlpPolicy> policy_;
  rl::GaussianHead head_;
  std::unique_ptr<rl::MlpValue> value_;
};

}  // namespace poseloop::imit
