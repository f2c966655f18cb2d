#pragma once

#include <functional>
#include <string>

#include "poseloop/neural/param.hpp"

namespace poseloop::neural {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int coords_checked = 0;
  std::string worst_param;
  bool pass = false;
};

// Compares analytic gradients against central finite differences on randomly
// sampled parameter coordinates. loss_and_grad must zero nothing itself: it
// runs one deterministic forward+backward pass, accumulating into store
// grads, and returns the scalar loss.
GradCheckReport gradient_check(ParamStore& store,
                               const std::function<double()>& loss_and_grad, Rng& rng,
                               int min_coords = 200, double h = 1e-5,
                               double rel_tol = 1e-4);

}  // namespace poseloop::neural
