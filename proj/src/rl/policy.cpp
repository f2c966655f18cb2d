#include "poseloop/rl/policy.hpp"

#include <cmath>

#include "poseloop/common/error.hpp"

namespace poseloop::rl {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
}

GaussianHead GaussianHead::create(neural::ParamStore& store, const std::string& name,
                                  int act_dim, double init_log_std) {
  GaussianHead head;
  head.log_std = &store.create(name, act_dim, 1);
  head.log_std->value.setConstant(init_log_std);
  return head;
}

Eigen::VectorXd GaussianHead::sample(const Eigen::VectorXd& mean, Rng& rng) const {
  if (mean.size() != dim()) {
    throw DataError("gaussian head: mean dim " + std::to_string(mean.size()) +
                    " != " + std::to_string(dim()));
  }
  Eigen::VectorXd out(dim());
  const Eigen::VectorXd sig = sigma();
  for (int i = 0; i < dim(); ++i) out[i] = mean[i] + sig[i] * rng.normal();
  return out;
}

double GaussianHead::log_prob(const Eigen::VectorXd& mean,
                              const Eigen::VectorXd& action) const {
  const Eigen::ArrayXd ls = log_std->value.col(0).array();
  const Eigen::ArrayXd z = (action - mean).array() * (-ls).exp();
  return -0.5 * (z * z).sum() - ls.sum() - dim() * kHalfLog2Pi;
}

double GaussianHead::entropy() const {
  return log_std->value.sum() + dim() * (kHalfLog2Pi + 0.5);
}

MlpPolicy::MlpPolicy(neural::ParamStore& store, const std::string& prefix, int in_dim,
                     int hidden, int act_dim, Rng& rng)
    : l1_(store, prefix + ".l1", in_dim, hidden, rng),
      l2_(store, prefix + ".l2", hidden, hidden, rng),
      l3_(store, prefix + ".l3", hidden, act_dim, rng),
      act_dim_(act_dim) {}

Mat MlpPolicy::forward(const Mat& obs) {
  return l3_.forward(t2_.forward(l2_.forward(t1_.forward(l1_.forward(obs)))));
}

void MlpPolicy::backward(const Mat& dmean) {
  l1_.backward(t1_.backward(l2_.backward(t2_.backward(l3_.backward(dmean)))));
}

Mat MlpPolicy::infer(const Mat& obs) const {
  Mat h = l1_.infer(obs).array().tanh();
  h = l2_.infer(h).array().tanh();
  return l3_.infer(h);
}

MlpValue::MlpValue(neural::ParamStore& store, const std::string& prefix, int in_dim,
                   int hidden, Rng& rng)
    : l1_(store, prefix + ".l1", in_dim, hidden, rng),
      l2_(store, prefix + ".l2", hidden, hidden, rng),
      l3_(store, prefix + ".l3", hidden, 1, rng) {}

Eigen::VectorXd MlpValue::forward(const Mat& obs) {
  return l3_.forward(t2_.forward(l2_.forward(t1_.forward(l1_.forward(obs))))).row(0);
}

void MlpValue::backward(const Eigen::VectorXd& dvalue) {
  Mat dy(1, dvalue.size());
  dy.row(0) = dvalue;
  l1_.backward(t1_.backward(l2_.backward(t2_.backward(l3_.backward(dy)))));
}

Eigen::VectorXd MlpValue::infer(const Mat& obs) const {
  Mat h = l1_.infer(obs).array().tanh();
  h = l2_.infer(h).array().tanh();
  return l3_.infer(h).row(0);
}

}  // namespace poseloop::rl
