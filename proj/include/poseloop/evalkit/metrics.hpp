#pragma once

#include <vector>

#include "poseloop/motion/types.hpp"

namespace poseloop::evalkit {

using motion::MotionSequence3D;

// Per joint-frame position errors in millimeters, flattened frame-major.
// root_align subtracts each frame's root position from both sequences first.
std::vector<double> joint_errors_mm(const MotionSequence3D& pred,
                                    const MotionSequence3D& ref, bool root_align,
                                    int root_joint = 0);

double mpjpe_mm(const MotionSequence3D& pred, const MotionSequence3D& ref,
                bool root_align, int root_joint = 0);

struct SimilarityTransform {
  double scale = 1.0;
  motion::Mat3 rotation = motion::Mat3::Identity();
  motion::Vec3 translation = motion::Vec3::Zero();

  motion::Vec3 apply(const motion::Vec3& p) const {
    return scale * (rotation * p) + translation;
  }
};

// Closed-form similarity alignment (rotation restricted to det +1, uniform
// scale, translation) minimizing mean squared distance from `from` to `to`.
// Rows are points.
SimilarityTransform umeyama_alignment(const Eigen::MatrixXd& from,
                                      const Eigen::MatrixXd& to);

enum class PaMode { per_sequence, per_frame };

// MPJPE after Procrustes alignment of pred onto ref. per_sequence fits one
// transform over all frames stacked; per_frame fits each frame separately.
double pa_mpjpe_mm(const MotionSequence3D& pred, const MotionSequence3D& ref,
                   PaMode mode = PaMode::per_sequence);

// Fraction of errors strictly below the threshold.
double pck_from_errors(const std::vector<double>& errors_mm, double threshold_mm);

// Mean PCK over thresholds 0,5,...,150 mm (31 points).
double auc_from_errors(const std::vector<double>& errors_mm);

// Mean horizontal drift (mm per frame) of foot joints across consecutive
// frames where the foot stays below the contact height (m).
double foot_skate_mm(const MotionSequence3D& motion, const std::vector<int>& feet,
                     double contact_height = 0.05);

// Mean ground penetration of foot joints in cm: max(0, -z) averaged over all
// frames and feet.
double ground_penetration_cm(const MotionSequence3D& motion, const std::vector<int>& feet);

}  // namespace poseloop::evalkit
