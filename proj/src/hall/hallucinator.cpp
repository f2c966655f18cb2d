#include "poseloop/hall/hallucinator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poseloop/common/error.hpp"
#include "poseloop/motion/geometry.hpp"
#include "poseloop/neural/checkpoint.hpp"

namespace poseloop::hall {

using motion::Quat;
using motion::Vec3;

namespace {

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate_pool(const SkeletonSpec& skel, const std::vector<ReducedPoseSequence>& pool,
                   const char* who) {
  if (pool.empty()) throw DataError(std::string(who) + ": empty clip pool");
  const int nd = skel.non_root_dof();
  for (const auto& clip : pool) {
    if (clip.length() == 0) throw DataError(std::string(who) + ": empty clip in pool");
    for (const auto& f : clip.frames) {
      if (f.angles.size() != nd) throw DataError(std::string(who) + ": joint dimension mismatch");
    }
  }
}

// Columns 0..L of one gap in the opening anchor's chart: the anchor itself,
// the generated interiors, the closing anchor.
Mat segment_matrix(const Eigen::VectorXd& enc_a, const Mat& ys, const Eigen::VectorXd& enc_b) {
  Mat seg(enc_a.size(), ys.cols() + 2);
  seg.col(0) = enc_a;
  if (ys.cols() > 0) seg.middleCols(1, ys.cols()) = ys;
  seg.col(ys.cols() + 1) = enc_b;
  return seg;
}

}  // namespace

void validate_hallucinator_config(const HallucinatorConfig& config) {
  if (config.k < 2) throw ConfigError("hallucinator: k must be >= 2");
  if (config.gen_lr <= 0.0 || config.disc_lr <= 0.0) {
    throw ConfigError("hallucinator: learning rates must be positive");
  }
  if (config.adv_weight < 0.0) throw ConfigError("hallucinator: adv_weight must be >= 0");
  if (config.bptt_window < 1 || config.hidden < 1 || config.disc_channels < 1 ||
      config.steps < 1 || config.batch < 1 || config.log_every < 1) {
    throw ConfigError("hallucinator: sizes must be >= 1");
  }
  if (config.disc_window < 5) {
    throw ConfigError("disc_window must cover two kernel-3 convolutions (>= 5 frames)");
  }
  if (config.v_max <= 0.0) throw ConfigError("hallucinator: v_max must be positive");
}

void validate_keyframes(const SkeletonSpec& skel, const KeyframeSet& keys, int k) {
  if (keys.anchors.size() < 2) throw DataError("keyframes: need at least two anchors");
  if (keys.anchors.front().index != 0) throw DataError("keyframes: first anchor must be frame 0");
  if (keys.fps <= 0.0) throw DataError("keyframes: fps must be positive");
  const int nd = skel.non_root_dof();
  for (std::size_t i = 0; i < keys.anchors.size(); ++i) {
    const auto& a = keys.anchors[i];
    if (a.pose.angles.size() != nd) throw DataError("keyframes: joint dimension mismatch");
    if (!a.pose.root_pos.allFinite() || !a.pose.root_rot.coeffs().allFinite() ||
        !a.pose.angles.allFinite()) {
      throw DataError("keyframes: non-finite anchor pose");
    }
    if (i > 0) {
      const int gap = a.index - keys.anchors[i - 1].index;
      if (gap < 1) throw DataError("keyframes: anchor indices must strictly increase");
      if (gap > k) throw DataError("keyframes: anchor gap exceeds k");
    }
  }
}

Hallucinator::Hallucinator(const SkeletonSpec& skel, const HallucinatorConfig& config,
                           std::uint64_t seed)
    : skel_(skel), config_(config), enc_dim_(6 + skel.non_root_dof()) {
  validate_hallucinator_config(config);

  gen_store_.seed = derive_seed(seed, "hall.gen");
  Rng grng(gen_store_.seed);
  gru_ = std::make_unique<neural::GRUCell>(gen_store_, "gru", 2 * enc_dim_ + 1, config.hidden,
                                           grng);
  out_w_ = &gen_store_.create("out.w", enc_dim_, config.hidden);
  neural::glorot_init(*out_w_, config.hidden, enc_dim_, grng);
  out_b_ = &gen_store_.create("out.b", enc_dim_, 1);

  disc_store_.seed = derive_seed(seed, "hall.disc");
  Rng drng(disc_store_.seed);
  d1_ = std::make_unique<neural::Conv1d>(disc_store_, "disc.c1", enc_dim_, config.disc_channels,
                                         3, 1, drng);
  d2_ = std::make_unique<neural::Conv1d>(disc_store_, "disc.c2", config.disc_channels,
                                         config.disc_channels, 3, 1, drng);
  dhead_ = std::make_unique<neural::Dense>(disc_store_, "disc.head", config.disc_channels, 1,
                                           drng);
}

Eigen::VectorXd Hallucinator::encode_local(const ReducedFrame& anchor,
                                           const ReducedFrame& frame) const {
  const Quat q_yaw = motion::yaw_quat(motion::heading_yaw(skel_, anchor.root_rot));
  const Quat inv = q_yaw.conjugate();
  Eigen::VectorXd enc(enc_dim_);
  enc.head<3>() = inv * (frame.root_pos - anchor.root_pos);
  enc.segment<3>(3) = motion::quat_log(inv * frame.root_rot);
  enc.tail(enc_dim_ - 6) = frame.angles;
  return enc;
}

ReducedFrame Hallucinator::decode_local(const ReducedFrame& anchor,
                                        const Eigen::VectorXd& enc) const {
  if (enc.size() != enc_dim_) throw DataError("hallucinator: encoding dimension mismatch");
  const Quat q_yaw = motion::yaw_quat(motion::heading_yaw(skel_, anchor.root_rot));
  ReducedFrame out;
  out.root_pos = q_yaw * Vec3(enc.head<3>()) + anchor.root_pos;
  out.root_rot = q_yaw * motion::quat_exp(Vec3(enc.segment<3>(3)));
  out.root_rot.normalize();
  out.angles = enc.tail(enc_dim_ - 6);
  return out;
}

struct Hallucinator::GapRollout {
  Mat ys;  // enc_dim x (len-1), generated interior encodings
  Mat hs;  // hidden x (len-1)
  std::vector<neural::GRUCell::Cache> caches;  // filled only when keep_caches
};

Hallucinator::GapRollout Hallucinator::run_gap(const ReducedFrame& a,
                                               const Eigen::VectorXd& enc_b, int gap_len,
                                               bool keep_caches) const {
  const int inner = gap_len - 1;
  GapRollout roll;
  roll.ys.resize(enc_dim_, inner);
  roll.hs.resize(config_.hidden, inner);
  if (keep_caches) roll.caches.resize(inner);

  Eigen::VectorXd prev = encode_local(a, a);
  Mat h = Mat::Zero(config_.hidden, 1);
  Mat x(2 * enc_dim_ + 1, 1);
  for (int s = 1; s <= inner; ++s) {
    x.col(0).head(enc_dim_) = prev;
    x.col(0).segment(enc_dim_, enc_dim_) = enc_b;
    x(2 * enc_dim_, 0) = static_cast<double>(gap_len - s) / config_.k;
    h = gru_->step(x, h, keep_caches ? &roll.caches[s - 1] : nullptr);
    roll.hs.col(s - 1) = h.col(0);
    roll.ys.col(s - 1) = out_w_->value * h.col(0) + out_b_->value.col(0);
    prev = roll.ys.col(s - 1);
  }
  return roll;
}

double Hallucinator::disc_logit_infer(const Mat& window) const {
  Mat h = d1_->infer(window).cwiseMax(0.0);
  h = d2_->infer(h).cwiseMax(0.0);
  const Eigen::VectorXd pooled = h.rowwise().mean();
  return dhead_->infer(pooled)(0, 0);
}

Mat Hallucinator::window_matrix(const ReducedPoseSequence& clip, int anchor, int start) const {
  Mat win(enc_dim_, config_.disc_window);
  for (int c = 0; c < config_.disc_window; ++c) {
    win.col(c) = encode_local(clip.frames[anchor], clip.frames[start + c]);
  }
  return win;
}

std::vector<HallucinatorStats> Hallucinator::train(const std::vector<ReducedPoseSequence>& pool,
                                                   std::uint64_t seed) {
  validate_pool(skel_, pool, "hallucinator");
  const int W = config_.disc_window;

  // Recon gaps need an interior frame; adversarial segments must fit a full
  // disc window (L + 1 columns, L = min(k, T-1)).
  std::vector<std::size_t> recon_clips, adv_clips;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int t = pool[i].length();
    if (t >= 3) recon_clips.push_back(i);
    if (t >= W && config_.k >= W - 1) adv_clips.push_back(i);
  }
  if (recon_clips.empty()) {
    throw DataError("hallucinator: no clip long enough to cut a gap (need >= 3 frames)");
  }
  const bool adversarial = config_.adv_weight > 0.0;
  if (adversarial && adv_clips.empty()) {
    throw DataError(
        "hallucinator: adversarial training needs k >= disc_window - 1 and clips of at least "
        "disc_window frames");
  }

  gen_store_.step = 0;
  disc_store_.step = 0;
  neural::Adam gen_opt(gen_store_, config_.gen_lr);
  neural::Adam disc_opt(disc_store_, config_.disc_lr);
  Rng rng(seed);

  // Discriminator forward/backward pair with caches. The layers cache only
  // the last forward, so each forward is consumed before the next window.
  neural::ReLU drelu1, drelu2;
  int disc_cols = 0;
  auto disc_forward_train = [&](const Mat& window) -> double {
    const Mat h1 = drelu1.forward(d1_->forward(window));
    const Mat h2 = drelu2.forward(d2_->forward(h1));
    disc_cols = static_cast<int>(h2.cols());
    return dhead_->forward(h2.rowwise().mean())(0, 0);
  };
  auto disc_backward_train = [&](double dz) -> Mat {
    Mat dpooled = dhead_->backward(Mat::Constant(1, 1, dz));
    Mat dh2 = (dpooled / disc_cols).replicate(1, disc_cols);
    return d1_->backward(drelu1.backward(d2_->backward(drelu2.backward(dh2))));
  };

  struct GapDraw {
    std::size_t clip;
    int a;
    int len;
  };
  auto draw_gap = [&](const std::vector<std::size_t>& from) -> GapDraw {
    const std::size_t ci = from[rng.uniform_index(from.size())];
    const int t = pool[ci].length();
    const int len = std::min(config_.k, t - 1);
    const int a = static_cast<int>(rng.uniform_index(t - len));
    return {ci, a, len};
  };

  std::vector<HallucinatorStats> history;
  for (int step = 0; step < config_.steps; ++step) {
    HallucinatorStats st;
    st.step = step;

    if (adversarial) {
      disc_store_.zero_grads();
      int correct = 0;
      const double scale = 1.0 / (2.0 * config_.batch);
      for (int i = 0; i < config_.batch; ++i) {
        const GapDraw g = draw_gap(adv_clips);
        const int o = static_cast<int>(rng.uniform_index(g.len - W + 2));
        const double z = disc_forward_train(window_matrix(pool[g.clip], g.a, g.a + o));
        disc_backward_train(scale * (logistic(z) - 1.0));
        st.disc_loss += stable_softplus(-z);
        if (z > 0.0) ++correct;
      }
      for (int i = 0; i < config_.batch; ++i) {
        const GapDraw g = draw_gap(adv_clips);
        const ReducedFrame& a = pool[g.clip].frames[g.a];
        const Eigen::VectorXd enc_b = encode_local(a, pool[g.clip].frames[g.a + g.len]);
        const GapRollout roll = run_gap(a, enc_b, g.len, false);
        const Mat seg = segment_matrix(encode_local(a, a), roll.ys, enc_b);
        const int o = static_cast<int>(rng.uniform_index(g.len - W + 2));
        const double z = disc_forward_train(seg.middleCols(o, W));
        disc_backward_train(scale * logistic(z));
        st.disc_loss += stable_softplus(z);
        if (z < 0.0) ++correct;
      }
      disc_opt.step();
      st.disc_loss /= 2.0 * config_.batch;
      st.disc_accuracy = static_cast<double>(correct) / (2.0 * config_.batch);
    }

    // Generator phase: free-run every gap, L2 against the real interiors,
    // plus the non-saturating adversarial term on a window of the segment.
    gen_store_.zero_grads();
    std::vector<GapDraw> draws;
    draws.reserve(config_.batch);
    int n_adv = 0;
    for (int b = 0; b < config_.batch; ++b) {
      draws.push_back(draw_gap(recon_clips));
      if (adversarial && draws.back().len >= W - 1) ++n_adv;
    }

    for (const GapDraw& g : draws) {
      const auto& clip = pool[g.clip];
      const ReducedFrame& a = clip.frames[g.a];
      const int inner = g.len - 1;
      const Eigen::VectorXd enc_b = encode_local(a, clip.frames[g.a + g.len]);
      const GapRollout roll = run_gap(a, enc_b, g.len, true);

      Mat tgt(enc_dim_, inner);
      for (int s = 1; s <= inner; ++s) tgt.col(s - 1) = encode_local(a, clip.frames[g.a + s]);

      const double norm = static_cast<double>(enc_dim_) * inner * config_.batch;
      st.recon += (roll.ys - tgt).squaredNorm() / norm;
      Mat dY = 2.0 * (roll.ys - tgt) / norm;

      if (adversarial && g.len >= W - 1) {
        const Mat seg = segment_matrix(encode_local(a, a), roll.ys, enc_b);
        const int o = static_cast<int>(rng.uniform_index(g.len - W + 2));
        const double z = disc_forward_train(seg.middleCols(o, W));
        st.gen_adv += config_.adv_weight * stable_softplus(-z) / n_adv;
        const Mat dwin = disc_backward_train(config_.adv_weight * (logistic(z) - 1.0) / n_adv);
        // Only interior columns are generator outputs; anchors are constants.
        for (int c = 0; c < W; ++c) {
          const int si = o + c;
          if (si >= 1 && si <= g.len - 1) dY.col(si - 1) += dwin.col(c);
        }
      }

      // Backward through time. bptt_window truncates the hidden-state path;
      // the output-feedback path is exact (defaults never truncate: k - 1
      // steps < bptt_window).
      Mat dh_next = Mat::Zero(config_.hidden, 1);
      for (int s = inner; s >= 1; --s) {
        const Mat dy = dY.col(s - 1);
        out_w_->grad += dy * roll.hs.col(s - 1).transpose();
        out_b_->grad += dy;
        const Mat dh = out_w_->value.transpose() * dy + dh_next;
        Mat dx, dh_prev;
        gru_->backward_step(roll.caches[s - 1], dh, &dx, &dh_prev);
        if (s > 1) dY.col(s - 2) += dx.topRows(enc_dim_);
        dh_next = (inner - s + 1 >= config_.bptt_window) ? Mat::Zero(config_.hidden, 1)
                                                         : std::move(dh_prev);
      }
    }
    gen_opt.step();

    if (step % config_.log_every == 0 || step == config_.steps - 1) history.push_back(st);
  }
  return history;
}

ReducedPoseSequence Hallucinator::hallucinate_reduced(const KeyframeSet& keys) const {
  validate_keyframes(skel_, keys, config_.k);
  ReducedPoseSequence out;
  out.fps = keys.fps;
  out.frames.resize(keys.anchors.back().index + 1);
  for (const auto& kf : keys.anchors) out.frames[kf.index] = kf.pose;
  for (std::size_t i = 0; i + 1 < keys.anchors.size(); ++i) {
    const auto& a = keys.anchors[i];
    const auto& b = keys.anchors[i + 1];
    const int len = b.index - a.index;
    if (len < 2) continue;
    const GapRollout roll = run_gap(a.pose, encode_local(a.pose, b.pose), len, false);
    for (int s = 1; s < len; ++s) {
      out.frames[a.index + s] = decode_local(a.pose, roll.ys.col(s - 1));
    }
  }
  return out;
}

MotionSequence3D Hallucinator::hallucinate(const KeyframeSet& keys) const {
  MotionSequence3D out = motion::forward_kinematics(skel_, hallucinate_reduced(keys));
  out.stage = motion::StageTag::hallucinated;
  return out;
}

double Hallucinator::disc_accuracy(const std::vector<ReducedPoseSequence>& real,
                                   const std::vector<ReducedPoseSequence>& other,
                                   std::uint64_t seed, int n) const {
  if (n < 1) throw ConfigError("disc_accuracy: n must be >= 1");
  validate_pool(skel_, real, "disc_accuracy");
  validate_pool(skel_, other, "disc_accuracy");
  const int W = config_.disc_window;
  auto eligible = [&](const std::vector<ReducedPoseSequence>& pool) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].length() >= W && config_.k >= W - 1) idx.push_back(i);
    }
    if (idx.empty()) throw DataError("disc_accuracy: no clip spans a full disc window");
    return idx;
  };
  const auto ra = eligible(real);
  const auto rb = eligible(other);

  Rng rng(seed);
  auto draw = [&](const std::vector<ReducedPoseSequence>& pool,
                  const std::vector<std::size_t>& idx) -> Mat {
    const auto& clip = pool[idx[rng.uniform_index(idx.size())]];
    const int t = clip.length();
    const int len = std::min(config_.k, t - 1);
    const int a = static_cast<int>(rng.uniform_index(t - len));
    const int o = static_cast<int>(rng.uniform_index(len - W + 2));
    return window_matrix(clip, a, a + o);
  };
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    if (disc_logit_infer(draw(real, ra)) > 0.0) ++correct;
  }
  for (int i = 0; i < n; ++i) {
    if (disc_logit_infer(draw(other, rb)) < 0.0) ++correct;
  }
  return static_cast<double>(correct) / (2.0 * n);
}

void Hallucinator::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  neural::save_checkpoint(gen_store_, dir / "gen.ckpt");
  neural::save_checkpoint(disc_store_, dir / "disc.ckpt");
}

void Hallucinator::load(const std::filesystem::path& dir) {
  neural::load_checkpoint(gen_store_, dir / "gen.ckpt");
  neural::load_checkpoint(disc_store_, dir / "disc.ckpt");
}

KeyframeSet sample_keyframes(const SkeletonSpec& skel, const HallucinatorConfig& config,
                             const std::vector<ReducedPoseSequence>& pool, int target_length,
                             KeyframeMode mode, std::uint64_t seed) {
  validate_hallucinator_config(config);
  validate_pool(skel, pool, "sample_keyframes");
  if (target_length < config.k + 1) {
    throw DataError("sample_keyframes: target_length must cover at least one full gap");
  }

  Rng rng(seed);
  KeyframeSet keys;
  keys.fps = pool[0].fps;

  if (mode == KeyframeMode::within_clip) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].length() >= config.k + 1) eligible.push_back(i);
    }
    if (eligible.empty()) throw DataError("sample_keyframes: no clip spans a full gap");
    const auto& clip = pool[eligible[rng.uniform_index(eligible.size())]];
    keys.fps = clip.fps;
    const int bound = std::min(target_length - 1, clip.length() - 1);
    for (int idx = 0; idx <= bound; idx += config.k) {
      keys.anchors.push_back({idx, clip.frames[idx]});
    }
    return keys;
  }

  // Cross-clip stitching: anchors every k frames, each from a fresh clip,
  // yawed onto a smoothly drifting heading and displaced at most
  // (k / fps) * v_max horizontally per gap.
  const int gaps = (target_length - 2 + config.k) / config.k;
  std::size_t prev_clip = rng.uniform_index(pool.size());
  keys.anchors.push_back({0, pool[prev_clip].frames[rng.uniform_index(
                                 pool[prev_clip].frames.size())]});
  double heading = motion::heading_yaw(skel, keys.anchors[0].pose.root_rot);
  const double step_max = (config.k / keys.fps) * config.v_max;

  for (int g = 1; g <= gaps; ++g) {
    std::size_t ci = prev_clip;
    if (pool.size() > 1) {
      ci = rng.uniform_index(pool.size() - 1);
      if (ci >= prev_clip) ++ci;
    }
    const auto& clip = pool[ci];
    ReducedFrame pose = clip.frames[rng.uniform_index(clip.frames.size())];

    const double new_heading = motion::wrap_angle(heading + rng.uniform(-M_PI / 6, M_PI / 6));
    const double walk_dir = heading + rng.uniform(-M_PI / 6, M_PI / 6);
    const double dist = rng.uniform(0.0, step_max);

    pose.root_rot =
        motion::yaw_quat(new_heading - motion::heading_yaw(skel, pose.root_rot)) * pose.root_rot;
    pose.root_rot.normalize();
    const Vec3& prev_pos = keys.anchors.back().pose.root_pos;
    pose.root_pos.x() = prev_pos.x() + dist * std::cos(walk_dir);
    pose.root_pos.y() = prev_pos.y() + dist * std::sin(walk_dir);
    // Height stays as sampled: clips carry their own root elevation.

    keys.anchors.push_back({g * config.k, pose});
    heading = new_heading;
    prev_clip = ci;
  }
  return keys;
}

}  // namespace poseloop::hall
