#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "poseloop/common/rng.hpp"

namespace poseloop::neural {

// One named parameter matrix with its gradient accumulator. Vectors are n x 1.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
};

// Owns every parameter of one model. Layers keep stable Param pointers; the
// optimizer and checkpoint code iterate the store in creation order.
class ParamStore {
 public:
  Param& create(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);

  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
  void zero_grads();
  std::size_t scalar_count() const;

  // Flattened views in creation order, column-major within each param.
  Eigen::VectorXd flat_values() const;
  void set_flat_values(const Eigen::VectorXd& v);
  Eigen::VectorXd flat_grads() const;

  // Global-norm gradient clip; returns the pre-clip norm.
  double clip_grad_norm(double max_norm);

  std::uint64_t step = 0;  // optimizer steps taken, persisted in checkpoints
  std::uint64_t seed = 0;  // seed the model was initialized with

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Glorot uniform fill: +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Param& p, int fan_in, int fan_out, Rng& rng);

}  // namespace poseloop::neural
