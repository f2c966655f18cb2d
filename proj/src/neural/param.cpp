#include "poseloop/neural/param.hpp"

#include <cmath>

#include "poseloop/common/error.hpp"

namespace poseloop::neural {

Param& ParamStore::create(const std::string& name, int rows, int cols) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Eigen::MatrixXd::Zero(rows, cols);
  p->grad = Eigen::MatrixXd::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Eigen::VectorXd ParamStore::flat_values() const {
  Eigen::VectorXd out(scalar_count());
  std::size_t at = 0;
  for (const auto& p : params_) {
    out.segment(at, p->value.size()) =
        Eigen::Map<const Eigen::VectorXd>(p->value.data(), p->value.size());
    at += p->value.size();
  }
  return out;
}

void ParamStore::set_flat_values(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != scalar_count())
    throw DataError("flat parameter vector has wrong length");
  std::size_t at = 0;
  for (auto& p : params_) {
    Eigen::Map<Eigen::VectorXd>(p->value.data(), p->value.size()) =
        v.segment(at, p->value.size());
    at += p->value.size();
  }
}

Eigen::VectorXd ParamStore::flat_grads() const {
  Eigen::VectorXd out(scalar_count());
  std::size_t at = 0;
  for (const auto& p : params_) {
    out.segment(at, p->grad.size()) =
        Eigen::Map<const Eigen::VectorXd>(p->grad.data(), p->grad.size());
    at += p->grad.size();
  }
  return out;
}

double ParamStore::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (auto& p : params_) p->grad *= scale;
  }
  return norm;
}

void glorot_init(Param& p, int fan_in, int fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = rng.uniform(-bound, bound);
}

}  // namespace poseloop::neural
