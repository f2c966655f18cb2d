#include "poseloop/neural/loss.hpp"

#include <cmath>

namespace poseloop::neural {

LossGrad mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  Eigen::MatrixXd diff = pred - target;
  double n = static_cast<double>(diff.size());
  LossGrad out;
  out.loss = diff.array().square().sum() / n;
  out.dpred = (2.0 / n) * diff;
  return out;
}

LossGrad weighted_l1_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                          const Eigen::VectorXd& col_weight) {
  Eigen::MatrixXd diff = pred - target;
  double n = static_cast<double>(diff.size());
  LossGrad out;
  out.dpred.resize(diff.rows(), diff.cols());
  for (Eigen::Index c = 0; c < diff.cols(); ++c) {
    double w = col_weight[c];
    out.loss += w * diff.col(c).array().abs().sum();
    out.dpred.col(c) = (w / n) * diff.col(c).array().sign().matrix();
  }
  out.loss /= n;
  return out;
}

LossGrad bce_with_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& labels) {
  double n = static_cast<double>(logits.size());
  LossGrad out;
  out.dpred.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    double x = logits.data()[i];
    double y = labels.data()[i];
    out.loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    double sig = 1.0 / (1.0 + std::exp(-x));
    out.dpred.data()[i] = (sig - y) / n;
  }
  out.loss /= n;
  return out;
}

}  // namespace poseloop::neural
