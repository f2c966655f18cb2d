#include "poseloop/imit/imitator.hpp"

#include <algorithm>
#include <cmath>

#include "poseloop/common/error.hpp"
#include "poseloop/common/parallel.hpp"
#include "poseloop/neural/checkpoint.hpp"

namespace poseloop::imit {

using motion::MotionSequence3D;
using motion::ReducedFrame;
using motion::StageTag;

bool is_terminated(const SkeletonSpec& skel, const FrameState& sim,
                   const ReducedPoseSequence& reference, int t) {
  if (t < 0 || t >= reference.length()) {
    throw DataError("is_terminated: t outside reference");
  }
  if (t == reference.length() - 1) return true;
  const int head = motion::head_joint(skel);
  const double sim_z = motion::frame_transforms(skel, sim.pose).position[head].z();
  const double ref_z =
      motion::frame_transforms(skel, reference.frames[t]).position[head].z();
  return sim_z < ref_z - 0.3;
}

Imitator::Imitator(const SkeletonSpec& skel, const ImitatorConfig& config,
                   std::uint64_t seed)
    : skel_(&skel), config_(config) {
  validate_reward_config(config_.reward);
  obs_dim_ = imitator_obs_dim(skel);
  act_dim_ = skel.non_root_dof() + 6;
  pstore_.seed = seed;
  vstore_.seed = seed;

  const std::vector<int> ee = motion::end_effector_joints(skel);
  const int head = motion::head_joint(skel);
  head_ee_slot_ = static_cast<int>(std::find(ee.begin(), ee.end(), head) - ee.begin());

  Rng phi_rng(derive_seed(seed, "imit.phi"));
  phi_ = std::make_unique<PhiEncoder>(pstore_, "phi", skel, phi_rng);
  Rng policy_rng(derive_seed(seed, "imit.policy"));
  policy_ = std::make_unique<rl::MlpPolicy>(pstore_, "pi", obs_dim_, config_.hidden,
                                            act_dim_, policy_rng);
  head_ = rl::GaussianHead::create(pstore_, "pi.log_std", act_dim_, config_.init_log_std);
  Rng value_rng(derive_seed(seed, "imit.value"));
  value_ = std::make_unique<rl::MlpValue>(vstore_, "v", obs_dim_, config_.hidden, value_rng);
}

phys::Action Imitator::to_action(const Eigen::VectorXd& a) const {
  const int nd = skel_->non_root_dof();
  phys::Action action;
  action.pd_targets = a.head(nd);
  action.residual_force = config_.sim.residual_force_max * a.segment<3>(nd);
  action.residual_torque = config_.sim.residual_torque_max * a.tail<3>();
  return action;
}

Vec6 Imitator::applied_eta(const phys::Action& action) const {
  const double fm = config_.sim.residual_force_max;
  const double tm = config_.sim.residual_torque_max;
  Vec6 eta;
  eta.head<3>() = action.residual_force.cwiseMax(-fm).cwiseMin(fm);
  eta.tail<3>() = action.residual_torque.cwiseMax(-tm).cwiseMin(tm);
  return eta;
}

FrameState Imitator::initial_state(const ReducedFrame& ref0) const {
  FrameState s;
  s.pose = motion::rest_frame(*skel_);
  s.pose.root_pos.x() = ref0.root_pos.x();
  s.pose.root_pos.y() = ref0.root_pos.y();
  s.pose.root_rot = motion::yaw_quat(motion::heading_yaw(*skel_, ref0.root_rot));
  s.velocity.angle_rates = Eigen::VectorXd::Zero(skel_->non_root_dof());
  return s;
}

double Imitator::head_height(const MotionCharacteristics& c) const {
  return c.root_height + c.ee_pos[3 * head_ee_slot_ + 2];
}

ClipCache Imitator::build_cache(const ReducedPoseSequence& ref) const {
  ClipCache cache;
  cache.chars = sequence_characteristics(*skel_, ref);
  cache.head_z.resize(ref.length());
  for (int t = 0; t < ref.length(); ++t) cache.head_z[t] = head_height(cache.chars[t]);
  cache.phi = phi_->encode_clip(*skel_, ref);
  return cache;
}

namespace {

struct EpisodeData {
  Mat obs;
  Mat actions;
  Eigen::VectorXd logp;
  Eigen::VectorXd rewards;
  int steps = 0;
  bool terminated = false;  // head-fall or blowup, not clip end
};

}  // namespace

rl::TransitionBatch Imitator::collect_rollouts(const std::vector<ReducedPoseSequence>& pool,
                                               const std::vector<ClipCache>& caches,
                                               std::uint64_t seed,
                                               IterationStats& stats) const {
  if (pool.empty()) throw DataError("collect_rollouts: empty reference pool");
  if (caches.size() != pool.size()) {
    throw DataError("collect_rollouts: cache count mismatch");
  }

  double mean_steps = 0.0;
  for (const auto& ref : pool) mean_steps += std::max(1, ref.length() - 1);
  mean_steps /= pool.size();
  const int episodes =
      std::max(1, static_cast<int>(std::ceil(config_.ppo.rollout_batch / mean_steps)));

  std::vector<EpisodeData> data(episodes);
  const int workers = config_.workers > 0 ? config_.workers : default_workers();

  parallel_for(episodes, workers, [&](std::size_t e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    const std::size_t clip = rng.uniform_index(pool.size());
    const ReducedPoseSequence& ref = pool[clip];
    const ClipCache& cache = caches[clip];
    const int max_steps = ref.length() - 1;

    EpisodeData& ep = data[e];
    ep.obs.resize(obs_dim_, max_steps);
    ep.actions.resize(act_dim_, max_steps);
    ep.logp.resize(max_steps);
    ep.rewards.resize(max_steps);

    phys::Simulator sim(*skel_, config_.sim);
    sim.set_state(initial_state(ref.frames[0]));

    for (int t = 0; t < max_steps; ++t) {
      const ImitatorState st =
          featurize_state(*skel_, sim.state(), ref, t, *phi_, &cache.phi);
      ep.obs.col(t) = st.flat();
      const Eigen::VectorXd mu = policy_->infer(ep.obs.col(t));
      const Eigen::VectorXd a = head_.sample(mu, rng);
      const phys::Action action = to_action(a);
      try {
        sim.control_step(action);
      } catch (const SimBlowupError&) {
        ep.terminated = true;
        break;  // the poisoned transition is dropped
      }
      ep.actions.col(t) = a;
      ep.logp[t] = head_.log_prob(mu, a);
      const MotionCharacteristics sim_char = compute_characteristics(*skel_, sim.state());
      ep.rewards[t] = compute_reward(*skel_, config_.reward, sim_char, cache.chars[t + 1],
                                     applied_eta(action))
                          .total;
      ep.steps = t + 1;
      if (head_height(sim_char) < cache.head_z[t + 1] - 0.3) {
        ep.terminated = true;
        break;
      }
    }
  });

  int total = 0;
  for (const auto& ep : data) total += ep.steps;
  if (total == 0) throw TrainError("collect_rollouts: no transitions survived");

  rl::TransitionBatch batch;
  batch.obs.resize(obs_dim_, total);
  batch.actions.resize(act_dim_, total);
  batch.logp_old.resize(total);
  Eigen::VectorXd rewards(total);
  std::vector<rl::EpisodeSlice> slices;
  slices.reserve(data.size());

  int at = 0;
  double reward_sum = 0.0;
  stats = IterationStats{};
  for (const auto& ep : data) {
    if (ep.steps > 0) {
      batch.obs.middleCols(at, ep.steps) = ep.obs.leftCols(ep.steps);
      batch.actions.middleCols(at, ep.steps) = ep.actions.leftCols(ep.steps);
      batch.logp_old.segment(at, ep.steps) = ep.logp.head(ep.steps);
      rewards.segment(at, ep.steps) = ep.rewards.head(ep.steps);
      slices.push_back({at, ep.steps});
      at += ep.steps;
      reward_sum += ep.rewards.head(ep.steps).sum();
    }
    if (ep.terminated) ++stats.terminations;
  }

  const Eigen::VectorXd values = value_->infer(batch.obs);
  rl::gae_advantages(rewards, values, slices, config_.ppo.gamma, config_.ppo.lam,
                     batch.advantages, batch.returns);

  stats.episodes = episodes;
  stats.transitions = total;
  stats.mean_reward = reward_sum / episodes;
  stats.mean_length = static_cast<double>(total) / episodes;
  return batch;
}

std::vector<IterationStats> Imitator::train(const std::vector<ReducedPoseSequence>& pool,
                                            std::uint64_t seed) {
  if (pool.empty()) throw DataError("imitator train: empty pool");

  std::vector<ClipCache> caches(pool.size());
  const int workers = config_.workers > 0 ? config_.workers : default_workers();
  parallel_for(pool.size(), workers, [&](std::size_t i) { caches[i] = build_cache(pool[i]); });

  // Fresh optimizer state per run keeps resume-from-checkpoint byte-exact.
  pstore_.step = 0;
  vstore_.step = 0;
  neural::Adam popt(pstore_, config_.ppo.lr);
  neural::Adam vopt(vstore_, config_.ppo.value_lr);

  std::vector<IterationStats> history;
  history.reserve(config_.iterations);
  for (int it = 0; it < config_.iterations; ++it) {
    IterationStats stats;
    const rl::TransitionBatch batch = collect_rollouts(
        pool, caches, derive_seed(seed, 2 * static_cast<std::uint64_t>(it)), stats);
    Rng update_rng(derive_seed(seed, 2 * static_cast<std::uint64_t>(it) + 1));
    const rl::PpoStats ps = rl::ppo_update(*policy_, head_, pstore_, popt, *value_, vstore_,
                                           vopt, batch, config_.ppo, update_rng);
    stats.iteration = it;
    stats.policy_loss = ps.policy_loss;
    stats.value_loss = ps.value_loss;
    stats.entropy = ps.entropy;
    history.push_back(stats);
  }
  return history;
}

ImitateResult Imitator::imitate(const MotionSequence3D& reference, StageTag stage) const {
  const motion::IkResult ik = motion::inverse_kinematics(*skel_, reference);
  return imitate_reduced(ik.reduced, stage, ik.max_residual);
}

ImitateResult Imitator::imitate_reduced(const ReducedPoseSequence& reference, StageTag stage,
                                        double ik_residual) const {
  const int T = reference.length();
  if (T < 2) throw DataError("imitate: reference shorter than 2 frames");

  const Mat phi_cache = phi_->encode_clip(*skel_, reference);
  const int head = motion::head_joint(*skel_);
  Eigen::VectorXd ref_head_z(T);
  for (int t = 0; t < T; ++t) {
    ref_head_z[t] = motion::frame_transforms(*skel_, reference.frames[t]).position[head].z();
  }

  phys::Simulator sim(*skel_, config_.sim);
  sim.set_state(initial_state(reference.frames[0]));

  ImitateResult result;
  result.ik_residual = ik_residual;
  result.motion.fps = reference.fps;
  result.motion.stage = stage;
  result.motion.frames.resize(T);
  result.motion.frames[0] = motion::forward_kinematics_frame(*skel_, sim.state().pose);

  for (int t = 0; t + 1 < T; ++t) {
    const ImitatorState st =
        featurize_state(*skel_, sim.state(), reference, t, *phi_, &phi_cache);
    bool restart = false;
    try {
      sim.control_step(to_action(policy_->infer(st.flat())));
    } catch (const SimBlowupError&) {
      restart = true;
    }
    if (!restart) {
      const double head_z =
          motion::frame_transforms(*skel_, sim.state().pose).position[head].z();
      restart = head_z < ref_head_z[t + 1] - 0.3;
    }
    if (restart) {
      ++result.terminations;
      sim.set_state(initial_state(reference.frames[t + 1]));
    }
    result.motion.frames[t + 1] = motion::forward_kinematics_frame(*skel_, sim.state().pose);
  }
  return result;
}

void Imitator::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  neural::save_checkpoint(pstore_, dir / "policy.ckpt");
  neural::save_checkpoint(vstore_, dir / "value.ckpt");
}

void Imitator::load(const std::filesystem::path& dir) {
  neural::load_checkpoint(pstore_, dir / "policy.ckpt");
  neural::load_checkpoint(vstore_, dir / "value.ckpt");
}

}  // namespace poseloop::imit
