#pragma once

#include <Eigen/Dense>
#include <vector>

#include "poseloop/neural/param.hpp"

namespace poseloop::neural {

// Adam with bias correction. Moment buffers are keyed by parameter order, so
// the store's parameter set must not change after construction.
class Adam {
 public:
  explicit Adam(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  ParamStore& store_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace poseloop::neural
