#pragma once

#include <Eigen/Dense>

namespace poseloop::neural {

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd dpred;
};

// Mean squared error over all elements.
LossGrad mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

// Mean absolute error with a per-column weight (columns are samples).
LossGrad weighted_l1_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                          const Eigen::VectorXd& col_weight);

// Binary cross-entropy on logits, numerically stable; labels in {0,1}.
LossGrad bce_with_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& labels);

}  // namespace poseloop::neural
