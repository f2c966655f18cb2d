#pragma once

#include <vector>

#include "poseloop/phys/model.hpp"

namespace poseloop::phys {

// Composite-rigid-body mass matrix in the generalized-velocity layout
// [root w_body, root v_body, joint rates]. Diagnostics: the simulator itself
// uses articulated-body dynamics and never forms M.
Eigen::MatrixXd mass_matrix(const PhysModel& model, const ReducedFrame& pose);

// Generalized bias force C(q, qdot) from recursive Newton-Euler with qdd = 0:
// Coriolis/centrifugal plus gravity minus the external world wrenches (one per
// link, about the link origin). M*qdd + C = tau must match the simulator.
Eigen::VectorXd bias_forces(const PhysModel& model, const ReducedFrame& pose,
                            const Eigen::VectorXd& vel, double gravity,
                            const std::vector<Vec6>& ext_world);

}  // namespace poseloop::phys
