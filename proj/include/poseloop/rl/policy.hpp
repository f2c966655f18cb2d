#pragma once

#include <string>

#include "poseloop/common/rng.hpp"
#include "poseloop/neural/layers.hpp"

namespace poseloop::rl {

using neural::Mat;

// Mean network of a Gaussian policy. Columns of obs are samples.
class PolicyNet {
 public:
  virtual ~PolicyNet() = default;
  virtual Mat forward(const Mat& obs) = 0;           // caches for backward
  virtual void backward(const Mat& dmean) = 0;       // accumulates grads
  virtual Mat infer(const Mat& obs) const = 0;       // no caches
  virtual int action_dim() const = 0;
};

class ValueNet {
 public:
  virtual ~ValueNet() = default;
  virtual Eigen::VectorXd forward(const Mat& obs) = 0;
  virtual void backward(const Eigen::VectorXd& dvalue) = 0;
  virtual Eigen::VectorXd infer(const Mat& obs) const = 0;
};

// Diagonal Gaussian with a state-independent learnable log-std vector.
struct GaussianHead {
  neural::Param* log_std = nullptr;  // act_dim x 1

  static GaussianHead create(neural::ParamStore& store, const std::string& name, int act_dim,
                             double init_log_std = 0.0);

  int dim() const { return static_cast<int>(log_std->value.rows()); }
  Eigen::VectorXd sigma() const { return log_std->value.col(0).array().exp(); }
  Eigen::VectorXd sample(const Eigen::VectorXd& mean, Rng& rng) const;
  double log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& action) const;
  // entropy summed over action dims (state-independent)
  double entropy() const;
};

// Dense tanh stack: in -> hidden -> hidden -> out (linear head).
class MlpPolicy : public PolicyNet {
 public:
  MlpPolicy(neural::ParamStore& store, const std::string& prefix, int in_dim, int hidden,
            int act_dim, Rng& rng);
  Mat forward(const Mat& obs) override;
  void backward(const Mat& dmean) override;
  Mat infer(const Mat& obs) const override;
  int action_dim() const override { return act_dim_; }

 private:
  neural::Dense l1_, l2_, l3_;
  neural::Tanh t1_, t2_;
  int act_dim_;
};

class MlpValue : public ValueNet {
 public:
  MlpValue(neural::ParamStore& store, const std::string& prefix, int in_dim, int hidden,
           Rng& rng);
  Eigen::VectorXd forward(const Mat& obs) override;
  void backward(const Eigen::VectorXd& dvalue) override;
  Eigen::VectorXd infer(const Mat& obs) const override;

 private:
  neural::Dense l1_, l2_, l3_;
  neural::Tanh t1_, t2_;
};

}  // namespace poseloop::rl
