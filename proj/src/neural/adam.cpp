#include "poseloop/neural/adam.hpp"

#include <cmath>

namespace poseloop::neural {

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store.params()) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  store_.step += 1;
  double t = static_cast<double>(store_.step);
  double c1 = 1.0 - std::pow(beta1_, t);
  double c2 = 1.0 - std::pow(beta2_, t);
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * p.grad.array().square()).matrix();
    p.value.array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace poseloop::neural
